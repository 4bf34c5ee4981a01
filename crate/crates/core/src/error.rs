use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the tracking library.
#[derive(Debug, Error)]
pub enum Error {
    /// A geometric input collapsed to zero area or fewer than four usable vertices.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A correlation template carried no usable signal (zero intensity variance).
    #[error("no signal: {0}")]
    NoSignal(String),

    /// A metric is undefined for the given inputs (e.g. empty ground truth).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A scenario specification cannot be realized.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// A text input could not be parsed.
    #[error("parse error at {path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    /// Parsed input violates a format-level constraint.
    #[error("validation error: {0}")]
    Validation(String),

    /// An underlying I/O operation failed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
