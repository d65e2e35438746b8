//! Batch InfoNCE and the pretraining loop that produces the original encoder.
//!
//! A batch of `B` samples is stacked as `2B` feature rows where rows `2i` and
//! `2i + 1` are the two views of sample `i`. Every row acts as an anchor; its
//! repulsion term runs over all other rows of the batch, its positive
//! partner included.

mod pretrain;
pub(crate) mod terms;

pub use pretrain::{pretrain, train_on_ids, Architecture, ContrastiveConfig};

use crate::diffcore::FeatureLoss;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use terms::{check_unit_rows, TermAccumulator};

/// Default softmax temperature.
pub const DEFAULT_TEMPERATURE: f64 = 0.5;

/// The batch InfoNCE objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfoNce<T> {
    pub temperature: T,
    /// Accept a single pair, whose repulsion term then covers only the partner.
    pub allow_singleton: bool,
}

impl<T: Scalar> InfoNce<T> {
    pub fn new(temperature: T) -> Self {
        Self {
            temperature,
            allow_singleton: false,
        }
    }

    pub fn singleton(temperature: T) -> Self {
        Self {
            temperature,
            allow_singleton: true,
        }
    }

    fn check(&self, features: &Matrix<T>) -> Result<()> {
        if !(self.temperature > T::zero()) {
            return Err(Error::Config(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        let rows = features.rows();
        if rows == 0 || rows % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "{rows} feature rows cannot form view pairs"
            )));
        }
        if rows == 2 && !self.allow_singleton {
            return Err(Error::Config(
                "a single pair has no negatives; enable singleton mode to allow it".into(),
            ));
        }
        check_unit_rows(features)
    }
}

impl<T: Scalar> FeatureLoss<T> for InfoNce<T> {
    fn value_and_grad(&self, features: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        self.check(features)?;
        let rows = features.rows();
        let mut acc = TermAccumulator::new(features);
        acc.anchored_contrast(0..rows, 0..rows, self.temperature.recip(), T::one());
        Ok(acc.finish())
    }
}

/// InfoNCE of a stacked pair batch; see the module docs for the layout.
pub fn info_nce_batch<T: Scalar>(features: &Matrix<T>, temperature: T) -> Result<T> {
    InfoNce::new(temperature).value(features)
}
