//! Deterministic derivation of independent RNG streams from a run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named stream so that, e.g., batch order and initialization never share state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Augment = 3,
    Split = 4,
    Synthetic = 5,
    RetainOrder = 6,
    UnlearnOrder = 7,
    MemberSample = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a seed together with a stream tag and any number of coordinates.
pub fn derive(seed: u64, stream: Stream, coords: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(stream as u64));
    for &c in coords {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn rng(seed: u64, stream: Stream, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream, coords))
}
