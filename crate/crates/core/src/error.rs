use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a domain constraint (score range, config field, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed input file (manifest row, WAV header, sidecar line, ...).
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Inputs parse but disagree with each other (duplicate ids, dimension
    /// mismatch, schema mismatch between a model and a matrix).
    #[error("data integrity error: {0}")]
    Integrity(String),

    /// A task cannot produce a meaningful result (single class, zero
    /// selected features, empty split).
    #[error("degenerate task: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav error on {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Validation(_) => 2,
            Error::Format { .. }
            | Error::Integrity(_)
            | Error::Io { .. }
            | Error::Wav { .. }
            | Error::Serde(_) => 3,
            Error::Degenerate(_) => 4,
        }
    }
}
