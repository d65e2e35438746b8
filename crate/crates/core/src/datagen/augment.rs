use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::seed::{self, Stream};

/// Zero padding added on each side before the random crop in image mode.
const CROP_PAD: usize = 4;

/// Strengths of the stochastic view transform.
///
/// Vector mode applies, in order: a uniform multiplicative scale, coordinate
/// dropout, and additive Gaussian jitter. Image mode treats samples as three
/// square planes and applies a padded random crop plus a horizontal flip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentorConfig {
    pub noise_sigma: f64,
    pub mask_prob: f64,
    pub scale_range: (f64, f64),
    pub image_mode: bool,
}

impl Default for AugmentorConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 0.5,
            mask_prob: 0.1,
            scale_range: (0.8, 1.2),
            image_mode: false,
        }
    }
}

impl AugmentorConfig {
    /// A transform that returns the sample unchanged.
    pub fn identity() -> Self {
        Self {
            noise_sigma: 0.0,
            mask_prob: 0.0,
            scale_range: (1.0, 1.0),
            image_mode: false,
        }
    }

    pub fn is_identity(&self) -> bool {
        !self.image_mode
            && self.noise_sigma == 0.0
            && self.mask_prob == 0.0
            && self.scale_range == (1.0, 1.0)
    }

    /// Range checks. The identity transform passes; callers that need
    /// distinct positive views should also check [`is_identity`](Self::is_identity).
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma {}", self.noise_sigma)));
        }
        if !(0.0..1.0).contains(&self.mask_prob) {
            return Err(Error::Config(format!(
                "mask probability {} outside [0, 1)",
                self.mask_prob
            )));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("scale range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// Coordinates that fix the random stream for a sample's views.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ViewSeed {
    pub seed: u64,
    pub id: u64,
    pub epoch: u64,
}

/// `count` independent views of one sample. The same [`ViewSeed`] always
/// yields the same views; the first two are the pair of [`augment_pair`].
pub fn augment_views<T: Scalar>(
    sample: &[T],
    cfg: &AugmentorConfig,
    at: ViewSeed,
    count: usize,
) -> Vec<Vec<T>> {
    let mut rng = seed::rng(at.seed, Stream::Augment, &[at.id, at.epoch]);
    (0..count).map(|_| one_view(sample, cfg, &mut rng)).collect()
}

/// Two independently augmented views of the same sample.
pub fn augment_pair<T: Scalar>(
    sample: &[T],
    cfg: &AugmentorConfig,
    at: ViewSeed,
) -> (Vec<T>, Vec<T>) {
    let mut v = augment_views(sample, cfg, at, 2);
    let y = v.pop().expect("two views");
    let x = v.pop().expect("two views");
    (x, y)
}

/// Stacks view pairs of the given dataset rows as `[x0, y0, x1, y1, ...]`.
pub fn paired_batch<T: Scalar>(
    data: &LabeledDataset<T>,
    rows: &[usize],
    cfg: &AugmentorConfig,
    seed: u64,
    epoch: u64,
) -> Matrix<T> {
    let dim = data.dim();
    let mut out = Vec::with_capacity(2 * rows.len() * dim);
    for &r in rows {
        let at = ViewSeed {
            seed,
            id: data.ids()[r],
            epoch,
        };
        let (x, y) = augment_pair(data.sample(r), cfg, at);
        out.extend(x);
        out.extend(y);
    }
    Matrix::from_vec(2 * rows.len(), dim, out).expect("sized above")
}

fn one_view<T: Scalar, R: Rng>(sample: &[T], cfg: &AugmentorConfig, rng: &mut R) -> Vec<T> {
    if cfg.image_mode {
        return crop_flip(sample, rng);
    }
    let (lo, hi) = cfg.scale_range;
    let scale = if hi > lo { rng.random_range(lo..hi) } else { lo };
    sample
        .iter()
        .map(|&x| {
            let mut v = x.as_f64() * scale;
            if cfg.mask_prob > 0.0 && rng.random::<f64>() < cfg.mask_prob {
                v = 0.0;
            }
            if cfg.noise_sigma > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                v += cfg.noise_sigma * z;
            }
            T::lit(v)
        })
        .collect()
}

/// Random crop of a zero-padded 3-plane square image plus a horizontal flip
/// with probability one half. Samples whose length is not `3 * side²` are
/// treated as a single plane row.
fn crop_flip<T: Scalar, R: Rng>(sample: &[T], rng: &mut R) -> Vec<T> {
    let (planes, side) = image_geometry(sample.len());
    let dx = rng.random_range(0..=2 * CROP_PAD) as isize - CROP_PAD as isize;
    let dy = if side > 1 {
        rng.random_range(0..=2 * CROP_PAD) as isize - CROP_PAD as isize
    } else {
        0
    };
    let flip = rng.random::<bool>();
    let width = sample.len() / planes / side;
    let mut out = vec![T::zero(); sample.len()];
    for p in 0..planes {
        for r in 0..side {
            for c in 0..width {
                let src_c = if flip { width - 1 - c } else { c } as isize + dx;
                let src_r = r as isize + dy;
                if src_r >= 0 && (src_r as usize) < side && src_c >= 0 && (src_c as usize) < width {
                    out[(p * side + r) * width + c] =
                        sample[(p * side + src_r as usize) * width + src_c as usize];
                }
            }
        }
    }
    out
}

fn image_geometry(len: usize) -> (usize, usize) {
    if len % 3 == 0 {
        let side = ((len / 3) as f64).sqrt().round() as usize;
        if side * side * 3 == len {
            return (3, side);
        }
    }
    (1, 1)
}
