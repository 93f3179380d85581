use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library and the command-line runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver diverged in {stage}: non-finite objective with step size {step:e}")]
    Divergence { stage: &'static str, step: f64 },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("{path}: bad IDX magic 0x{observed:08x} (expected 0x{expected:08x})")]
    Format {
        path: PathBuf,
        observed: u32,
        expected: u32,
    },

    #[error("{path}: truncated IDX file, expected {expected} bytes but found {actual}")]
    Length {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("{path}: label {value} at position {position} is outside 0..=9")]
    Value { path: PathBuf, position: usize, value: u8 },

    #[error("cannot stratify {n_train} labelled samples over {n_classes} classes: {reason}")]
    CannotStratify {
        n_train: usize,
        n_classes: usize,
        reason: String,
    },

    #[error("model container: {0}")]
    Container(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
