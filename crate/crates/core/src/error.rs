use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator, models, learner and controller.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The quantity requested is not defined for the given input
    /// (zero variance, zero eligible slots, all-zero throughputs, ...).
    #[error("undefined: {0}")]
    Undefined(String),

    /// A trace or config file failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A control command was refused and nothing was applied.
    #[error("rejected: {0}")]
    Rejected(String),

    /// Operation called before the state it needs exists.
    #[error("not ready: {0}")]
    NotReady(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn undefined(msg: impl Into<String>) -> Self {
        Error::Undefined(msg.into())
    }

    pub(crate) fn parse(line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
