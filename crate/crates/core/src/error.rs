use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("byte count mismatch: sidecar implies {expected} bytes, file has {actual}")]
    ByteCountMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("both state likelihoods underflow to zero at t={t}")]
    Underflow { t: usize },

    #[error("zero predictive denominator at t={t} with non-zero smoothed mass")]
    ZeroDenominator { t: usize },

    #[error("log-likelihood decreased at iteration {iteration}: {previous} -> {current}")]
    NonMonotone {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_)
                | Error::Underflow { .. }
                | Error::ZeroDenominator { .. }
                | Error::NonMonotone { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
