//! Building blocks shared by every contrastive objective: weighted pair
//! similarities and anchored log-sum-exp repulsion, accumulated together with
//! their feature gradients.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};
use crate::scalar::Scalar;

/// Tolerance on row norms for objectives that take dot products as cosines.
const UNIT_NORM_TOL: f64 = 1e-6;

pub(crate) fn check_unit_rows<T: Scalar>(feats: &Matrix<T>) -> Result<()> {
    let tol = T::lit(UNIT_NORM_TOL);
    for (i, row) in feats.iter_rows().enumerate() {
        let n = dot(row, row).sqrt();
        if !n.is_finite() {
            return Err(Error::Numeric(format!("feature row {i} is not finite")));
        }
        if (n - T::one()).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "feature row {i} has norm {n}, expected unit norm"
            )));
        }
    }
    Ok(())
}

/// Running value and gradient of a loss over a fixed feature matrix.
pub(crate) struct TermAccumulator<'a, T> {
    feats: &'a Matrix<T>,
    grad: Matrix<T>,
    value: T,
}

impl<'a, T: Scalar> TermAccumulator<'a, T> {
    pub fn new(feats: &'a Matrix<T>) -> Self {
        Self {
            feats,
            grad: Matrix::zeros(feats.rows(), feats.cols()),
            value: T::zero(),
        }
    }

    /// Adds `weight · ⟨z_a, z_b⟩`.
    pub fn pair(&mut self, a: usize, b: usize, weight: T) {
        let (za, zb) = (self.feats.row(a), self.feats.row(b));
        self.value += weight * dot(za, zb);
        axpy(weight, zb, self.grad.row_mut(a));
        axpy(weight, za, self.grad.row_mut(b));
    }

    /// Adds `weight · log Σ_{k ∈ pool, k ≠ anchor} exp(⟨z_anchor, z_k⟩ / τ)`,
    /// stabilized by subtracting the largest exponent.
    pub fn log_sum_exp(&mut self, anchor: usize, pool: Range<usize>, inv_tau: T, weight: T) {
        let za = self.feats.row(anchor);
        let members: Vec<usize> = pool.filter(|&k| k != anchor).collect();
        if members.is_empty() {
            return;
        }
        let logits: Vec<T> = members
            .iter()
            .map(|&k| dot(za, self.feats.row(k)) * inv_tau)
            .collect();
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
        let total: T = exps.iter().copied().sum();
        self.value += weight * (max + total.ln());

        let mut d_anchor = vec![T::zero(); self.feats.cols()];
        for (&k, &e) in members.iter().zip(&exps) {
            let coeff = weight * inv_tau * e / total;
            axpy(coeff, self.feats.row(k), &mut d_anchor);
            axpy(coeff, za, self.grad.row_mut(k));
        }
        axpy(T::one(), &d_anchor, self.grad.row_mut(anchor));
    }

    /// InfoNCE-style block: every row of `anchors` (laid out as consecutive
    /// positive pairs) contributes `−s_τ(anchor, partner)` plus the
    /// log-sum-exp over `pool` without itself, all averaged over anchors and
    /// scaled by `weight`.
    pub fn anchored_contrast(
        &mut self,
        anchors: Range<usize>,
        pool: Range<usize>,
        inv_tau: T,
        weight: T,
    ) {
        let count = anchors.len();
        if count == 0 {
            return;
        }
        let w = weight / T::from_count(count);
        for a in anchors.clone() {
            let partner = anchors.start + ((a - anchors.start) ^ 1);
            // each pair appears once per anchor, so its weight halves per call
            if a < partner {
                self.pair(a, partner, -(w + w) * inv_tau);
            }
            self.log_sum_exp(a, pool.clone(), inv_tau, w);
        }
    }

    pub fn finish(self) -> (T, Matrix<T>) {
        (self.value, self.grad)
    }
}
