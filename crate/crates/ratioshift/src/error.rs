//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by any fallible operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible array dimensions; the message carries both shapes.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A parameter outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A NaN or infinity where a finite value is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Training aborted because the loss left the representable range.
    #[error("training diverged at step {step}: {detail}")]
    TrainingDiverged { step: usize, detail: String },

    /// Malformed experiment configuration (file or flags).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed snapshot or results file.
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    /// I/O failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
