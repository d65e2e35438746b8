//! Feature-level objectives used while unlearning.
//!
//! All of them read a stacked view batch whose first `2R` rows are retain
//! pairs and whose next `2U` rows are unlearn pairs (see [`ViewLayout`]).
//! The pool of the log-sum-exp terms is every row of the batch, which stands
//! in for the train density.

use std::ops::Range;

use crate::contrastive::terms::{check_unit_rows, TermAccumulator};
use crate::diffcore::FeatureLoss;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Row layout of a stacked retain + unlearn batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ViewLayout {
    pub retain_pairs: usize,
    pub unlearn_pairs: usize,
}

impl ViewLayout {
    pub fn rows(&self) -> usize {
        2 * (self.retain_pairs + self.unlearn_pairs)
    }

    pub fn retain_rows(&self) -> Range<usize> {
        0..2 * self.retain_pairs
    }

    pub fn unlearn_rows(&self) -> Range<usize> {
        2 * self.retain_pairs..self.rows()
    }

    fn check<T: Scalar>(&self, feats: &Matrix<T>) -> Result<()> {
        if feats.rows() != self.rows() {
            return Err(Error::InvalidInput(format!(
                "layout expects {} rows, batch has {}",
                self.rows(),
                feats.rows()
            )));
        }
        check_unit_rows(feats)
    }
}

/// Weights of the three unlearn terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration<T> {
    /// Negative alignment calibration.
    pub alpha: T,
    /// Positive alignment calibration.
    pub beta: T,
    /// Performance preserving.
    pub gamma: T,
}

/// Positive alignment on retain pairs plus repulsion of every retain anchor
/// from the whole pool, with temperature-scaled similarities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetainObjective<T> {
    pub layout: ViewLayout,
    pub temperature: T,
}

impl<T: Scalar> RetainObjective<T> {
    pub(crate) fn accumulate(&self, acc: &mut TermAccumulator<'_, T>, weight: T) -> Result<()> {
        if self.layout.retain_pairs == 0 {
            return Err(Error::Config("retain batch is empty".into()));
        }
        acc.anchored_contrast(
            self.layout.retain_rows(),
            0..self.layout.rows(),
            self.temperature.recip(),
            weight,
        );
        Ok(())
    }
}

impl<T: Scalar> FeatureLoss<T> for RetainObjective<T> {
    fn value_and_grad(&self, feats: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        self.layout.check(feats)?;
        let mut acc = TermAccumulator::new(feats);
        self.accumulate(&mut acc, T::one())?;
        Ok(acc.finish())
    }
}

/// `−α·mean cos(negative pairs) + β·mean cos(positive pairs) +
/// γ·mean_anchor log Σ_pool exp(s_τ)` over the unlearn rows.
///
/// Calibration terms use raw cosine; the preserving term uses the
/// temperature. Negative pairs are all view pairs from distinct samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnlearnObjective<T> {
    pub layout: ViewLayout,
    pub temperature: T,
    pub calibration: Calibration<T>,
}

impl<T: Scalar> UnlearnObjective<T> {
    pub(crate) fn accumulate(&self, acc: &mut TermAccumulator<'_, T>, weight: T) -> Result<()> {
        let pairs = self.layout.unlearn_pairs;
        if pairs == 0 {
            return Err(Error::Config("unlearn batch is empty".into()));
        }
        let rows = self.layout.unlearn_rows();
        let Calibration { alpha, beta, gamma } = self.calibration;

        if alpha != T::zero() {
            // 2U views; each view pairs with the 2U - 2 views of other samples
            let negatives = 2 * pairs * (pairs - 1);
            if negatives == 0 {
                log::warn!("single unlearn sample: negative alignment term is zero");
            } else {
                let w = -weight * alpha / T::from_count(negatives);
                for a in rows.clone() {
                    for b in (a + 1)..rows.end {
                        if (a - rows.start) / 2 != (b - rows.start) / 2 {
                            acc.pair(a, b, w);
                        }
                    }
                }
            }
        }
        if beta != T::zero() {
            let w = weight * beta / T::from_count(pairs);
            for i in 0..pairs {
                let a = rows.start + 2 * i;
                acc.pair(a, a + 1, w);
            }
        }
        if gamma != T::zero() {
            let w = weight * gamma / T::from_count(rows.len());
            let inv_tau = self.temperature.recip();
            for a in rows.clone() {
                acc.log_sum_exp(a, 0..self.layout.rows(), inv_tau, w);
            }
        }
        Ok(())
    }
}

impl<T: Scalar> FeatureLoss<T> for UnlearnObjective<T> {
    fn value_and_grad(&self, feats: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        self.layout.check(feats)?;
        let mut acc = TermAccumulator::new(feats);
        self.accumulate(&mut acc, T::one())?;
        Ok(acc.finish())
    }
}

/// Alignment-calibration objective: retain term plus `ε` times the unlearn
/// term. With `ε = 0` (or no unlearn rows) the unlearn term is skipped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcObjective<T> {
    pub layout: ViewLayout,
    pub temperature: T,
    pub calibration: Calibration<T>,
    pub epsilon: T,
}

impl<T: Scalar> AcObjective<T> {
    pub fn retain_part(&self) -> RetainObjective<T> {
        RetainObjective {
            layout: self.layout,
            temperature: self.temperature,
        }
    }

    pub fn unlearn_part(&self) -> UnlearnObjective<T> {
        UnlearnObjective {
            layout: self.layout,
            temperature: self.temperature,
            calibration: self.calibration,
        }
    }
}

impl<T: Scalar> FeatureLoss<T> for AcObjective<T> {
    fn value_and_grad(&self, feats: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        self.layout.check(feats)?;
        let mut acc = TermAccumulator::new(feats);
        self.retain_part().accumulate(&mut acc, T::one())?;
        if self.epsilon != T::zero() && self.layout.unlearn_pairs > 0 {
            self.unlearn_part().accumulate(&mut acc, self.epsilon)?;
        }
        Ok(acc.finish())
    }
}

/// InfoNCE on the retain rows minus `weight` times InfoNCE on the unlearn
/// rows; each group only contrasts against itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NegGradObjective<T> {
    pub layout: ViewLayout,
    pub temperature: T,
    pub weight: T,
}

impl<T: Scalar> FeatureLoss<T> for NegGradObjective<T> {
    fn value_and_grad(&self, feats: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        self.layout.check(feats)?;
        if self.layout.retain_pairs < 2 || self.layout.unlearn_pairs < 2 {
            return Err(Error::Config(
                "NegGrad needs at least two pairs in each batch".into(),
            ));
        }
        let inv_tau = self.temperature.recip();
        let mut acc = TermAccumulator::new(feats);
        let r = self.layout.retain_rows();
        let u = self.layout.unlearn_rows();
        acc.anchored_contrast(r.clone(), r, inv_tau, T::one());
        acc.anchored_contrast(u.clone(), u, inv_tau, -self.weight);
        Ok(acc.finish())
    }
}
