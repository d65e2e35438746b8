//! Contrastive pretraining, machine unlearning and unlearning audits for
//! small dense encoders.
//!
//! The numeric core is generic over [`Scalar`]; the aliases below fix it to
//! `f64`, which is what the training loops and audits use in practice.

pub mod contrastive;
pub mod datagen;
pub mod diffcore;
pub mod error;
pub mod evalsuite;
pub mod linalg;
pub mod persist;
pub mod scalar;
pub mod seed;
pub mod unlearn;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use scalar::Scalar;

pub type Mat = linalg::Matrix<f64>;
pub type Encoder = diffcore::EncoderNet<f64>;
pub type Grads = diffcore::GradSet<f64>;
pub type Dataset = datagen::LabeledDataset<f64>;
pub type Head = evalsuite::LinearHead<f64>;
pub type AlignmentMatrix = evalsuite::AlignmentMatrix<f64>;
pub type AlignmentGapMatrix = evalsuite::AlignmentGapMatrix<f64>;
