use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while loading profiles and traces or running the controller.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration must contain at least one branch")]
    EmptyConfiguration,

    #[error("unknown branch id `{0}`")]
    UnknownBranch(String),

    #[error("unknown sensor id `{sensor}` referenced by {by}")]
    UnknownSensor { sensor: String, by: String },

    #[error("no estimate or energy for configuration `{0}`")]
    MissingConfiguration(String),

    #[error("no loss entry for context `{context}` in branch `{branch}`")]
    MissingContext { branch: String, context: String },

    #[error("invalid value for {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("{0}")]
    Config(String),

    #[error("{path}: line {line}, column {column}: {field}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },

    #[error("{path}: {message}")]
    MalformedInput { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the file system rather than of the input contents.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
