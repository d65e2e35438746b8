//! Grayscale heatmaps in binary PGM.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Symmetric range `[-r, r]` with `r = max |entry|`, so zero maps to mid-gray.
/// An all-zero matrix gets `[-1, 1]`.
pub fn symmetric_range<T: Scalar>(m: &Matrix<T>) -> (f64, f64) {
    let r = m.max_abs().as_f64();
    if r > 0.0 && r.is_finite() {
        (-r, r)
    } else {
        (-1.0, 1.0)
    }
}

/// Maps `value` linearly from `[lo, hi]` onto `0..=255`, clamping outside.
pub fn gray_level(value: f64, lo: f64, hi: f64) -> u8 {
    let t = ((value - lo) / (hi - lo)).clamp(0.0, 1.0);
    (t * 255.0).round() as u8
}

/// Encodes a `P5` image, one pixel per entry, rows top to bottom.
pub fn encode_pgm<T: Scalar>(m: &Matrix<T>, range: (f64, f64)) -> Result<Vec<u8>> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Export(format!("invalid heatmap range [{lo}, {hi}]")));
    }
    if !m.all_finite() {
        return Err(Error::Export("matrix has non-finite entries".into()));
    }
    let mut out = format!(
        "P5\n# range {lo:e} {hi:e}\n{} {}\n255\n",
        m.cols(),
        m.rows()
    )
    .into_bytes();
    out.extend(m.as_slice().iter().map(|v| gray_level(v.as_f64(), lo, hi)));
    Ok(out)
}

pub fn write_heatmap_pgm<T: Scalar>(
    m: &Matrix<T>,
    path: impl AsRef<Path>,
    range: (f64, f64),
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(m, range)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
