//! Binary encoder checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `MUCK` |
//! | 4 | format version (u32) |
//! | 4 | layer count `L` (u32) |
//! | 4 | flags (u32, bit 0 = normalized output) |
//! | 8·L | `(in_dim, out_dim)` per layer (u32 each) |
//! | ... | per layer: `out·in` weights row-major, then `out` biases (f64) |

use std::fs;
use std::path::Path;

use crate::diffcore::{DenseLayer, EncoderNet};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"MUCK";
pub const FORMAT_VERSION: u32 = 1;
const FLAG_NORMALIZE: u32 = 1;

/// Serializes the network to bytes.
pub fn encode_checkpoint<T: Scalar>(net: &EncoderNet<T>) -> Vec<u8> {
    let layers = net.layers();
    let mut out = Vec::with_capacity(16 + 8 * layers.len() + 8 * net.param_count());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    let flags = if net.normalize_output() { FLAG_NORMALIZE } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for l in layers {
        out.extend_from_slice(&(l.in_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(l.out_dim() as u32).to_le_bytes());
    }
    for p in net.params() {
        out.extend_from_slice(&p.as_f64().to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.path,
                self.bytes.len() as u64,
                format!("truncated while reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

/// Parses checkpoint bytes; `path` only labels errors.
pub fn decode_checkpoint<T: Scalar>(bytes: &[u8], path: &Path) -> Result<EncoderNet<T>> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(path, 0, "bad magic, expected MUCK"));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::format(path, 4, format!("unsupported version {version}")));
    }
    let count = r.u32("layer count")? as usize;
    if count == 0 {
        return Err(Error::format(path, 8, "checkpoint has no layers"));
    }
    let flags = r.u32("flags")?;
    if flags & !FLAG_NORMALIZE != 0 {
        return Err(Error::format(path, 12, format!("unknown flags {flags:#x}")));
    }
    let mut dims = Vec::with_capacity(count.min(1 << 16));
    for k in 0..count {
        let at = r.pos as u64;
        let i = r.u32("layer shape")? as usize;
        let o = r.u32("layer shape")? as usize;
        if i == 0 || o == 0 {
            return Err(Error::format(path, at, format!("layer {k} has a zero dimension")));
        }
        if let Some(&(_, prev_out)) = dims.last() {
            if prev_out != i {
                return Err(Error::format(path, at, format!("layer {k} does not chain")));
            }
        }
        dims.push((i, o));
    }
    let mut layers = Vec::with_capacity(count);
    for &(i, o) in &dims {
        let weight = (0..i * o)
            .map(|_| r.f64("weights").map(T::lit))
            .collect::<Result<Vec<T>>>()?;
        let bias = (0..o)
            .map(|_| r.f64("biases").map(T::lit))
            .collect::<Result<Vec<T>>>()?;
        layers.push(DenseLayer::new(Matrix::from_vec(o, i, weight)?, bias)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::format(path, r.pos as u64, "trailing bytes after weights"));
    }
    EncoderNet::new(layers, flags & FLAG_NORMALIZE != 0)
}

pub fn save_checkpoint<T: Scalar>(net: &EncoderNet<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<EncoderNet<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
