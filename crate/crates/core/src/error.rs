use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violated a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical routine could not produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what} in {path}: {message}")]
    Format {
        what: &'static str,
        path: PathBuf,
        message: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category used for CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Numerical(_) => "numerical",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Json(_) => "json",
        }
    }

    /// Process exit code: 3 for numerical failures, 2 for everything the
    /// caller can fix (bad input, bad paths, bad files).
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
