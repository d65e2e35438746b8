//! Angle distribution of two-dimensional features.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const ANGLE_BINS: usize = 18;

#[derive(Clone, Debug, PartialEq)]
pub struct Uniformity {
    /// Counts over `[-π, π]` in 18 equal bins; the last bin is closed.
    pub histogram: [usize; ANGLE_BINS],
    /// Kolmogorov–Smirnov distance to the uniform law on `[-π, π]`.
    pub ks_statistic: f64,
}

pub fn uniformity_angles<T: Scalar>(feats: &Matrix<T>) -> Result<Uniformity> {
    if feats.cols() != 2 {
        return Err(Error::InvalidInput(format!(
            "angle histogram needs 2D features, got {} columns",
            feats.cols()
        )));
    }
    if feats.rows() == 0 {
        return Err(Error::InvalidInput("no features".into()));
    }
    let mut angles: Vec<f64> = feats
        .iter_rows()
        .map(|r| r[1].as_f64().atan2(r[0].as_f64()))
        .collect();
    let mut histogram = [0; ANGLE_BINS];
    let width = 2.0 * PI / ANGLE_BINS as f64;
    for &a in &angles {
        let bin = (((a + PI) / width).floor() as usize).min(ANGLE_BINS - 1);
        histogram[bin] += 1;
    }
    angles.sort_by(f64::total_cmp);
    let n = angles.len() as f64;
    let ks = angles
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let cdf = ((a + PI) / (2.0 * PI)).clamp(0.0, 1.0);
            ((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n)
        })
        .fold(0.0, f64::max);
    Ok(Uniformity {
        histogram,
        ks_statistic: ks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{self, Stream};
    use rand::Rng;

    #[test]
    fn axis_directions() {
        let f = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
        ])
        .unwrap();
        let u = uniformity_angles(&f).unwrap();
        assert_eq!(u.histogram.iter().filter(|&&c| c > 0).count(), 4);
        assert_eq!(u.histogram.iter().sum::<usize>(), 4);
        // angles sit at cdf 1/4, 1/2, 3/4 and 1
        assert!((u.ks_statistic - 0.25).abs() < 1e-12, "{}", u.ks_statistic);
    }

    #[test]
    fn point_mass_is_maximally_concentrated() {
        let f = Matrix::from_rows(&vec![vec![1.0, 0.0]; 50]).unwrap();
        let u = uniformity_angles(&f).unwrap();
        assert_eq!(u.histogram.iter().max(), Some(&50));
        assert!(u.ks_statistic >= 0.5 - 1e-12);
        let g = Matrix::from_rows(&vec![vec![-1.0, -1e-9]; 50]).unwrap();
        assert!(uniformity_angles(&g).unwrap().ks_statistic > 1.0 - 1.0 / ANGLE_BINS as f64);
    }

    #[test]
    fn uniform_sample_is_close() {
        let mut rng = seed::rng(0, Stream::Synthetic, &[]);
        let rows: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                let a: f64 = rng.random_range(-PI..PI);
                vec![a.cos(), a.sin()]
            })
            .collect();
        let u = uniformity_angles(&Matrix::from_rows(&rows).unwrap()).unwrap();
        assert!(u.ks_statistic < 0.06, "{}", u.ks_statistic);
    }

    #[test]
    fn wrong_dimension_rejected() {
        assert!(uniformity_angles(&Matrix::<f64>::identity(3)).is_err());
    }
}
