use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("index {index} out of bounds for {what} of length {len}")]
    Bounds {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("infeasible partition: {0}")]
    Infeasible(String),
    #[error("all seed weights are zero")]
    DegenerateWeights,
    #[error("invalid seed: {0}")]
    InvalidSeed(String),
    #[error("degenerate eddy: {0}")]
    DegenerateEddy(String),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("png error: {0}")]
    Png(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Validation-type errors are reported before any work is done.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::InvalidParameter(_)
                | Error::OutOfDomain(_)
                | Error::NotFound(_)
                | Error::InvalidRange(_)
                | Error::Infeasible(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
