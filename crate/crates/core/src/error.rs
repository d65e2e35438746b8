use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or ids of an input do not fit the operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A non-finite value appeared in a computation.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A value lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Hyperparameters or split settings that cannot be honored.
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed file content.
    #[error("format error in {path} at byte {offset}: {msg}")]
    Format {
        path: PathBuf,
        offset: u64,
        msg: String,
    },
    /// Unable to synthesize a dataset with the requested geometry.
    #[error("generation error: {0}")]
    Generation(String),
    #[error("export error: {0}")]
    Export(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
