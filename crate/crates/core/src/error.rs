use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad identifiers, budgets or hyperparameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Not enough data to fit or calibrate something.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// A caller broke a precondition (shape mismatch, stale model, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 3,
            Error::Contract(_) => 4,
            Error::Calibration(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
