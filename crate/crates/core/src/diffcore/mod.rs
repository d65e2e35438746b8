//! Dense encoder, reverse-mode gradients and the SGD optimizer.

mod backprop;
mod net;
mod optim;

pub use backprop::{backprop, backward, finite_diff_check, FeatureLoss, GradSet};
pub use net::{gaussian_matrix, DenseLayer, EncoderNet, ForwardCache, NORM_FLOOR};
pub use optim::{cosine_lr, sgd_momentum_step, OptState};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::scalar::Scalar;

/// Cosine of the angle between two nonzero vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == T::zero() || nv == T::zero() {
        return Err(Error::Domain("cosine similarity of a zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).max(-T::one()).min(T::one()))
}
