//! Error types shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated an operation's domain (bad shapes, out-of-range values).
    #[error("domain error: {0}")]
    Domain(String),

    /// A protocol violation: an operation was called in an invalid state or order.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Configuration or validation failure, reported before any compute starts.
    #[error("config error: {0}")]
    Config(String),

    /// Training failed at runtime (non-finite gradients past the skip budget, etc.).
    #[error("training error at step {step}: {msg}")]
    Training { step: usize, msg: String },

    /// File format problems: bad magic, unsupported version, corrupt contents.
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 validation, 2 runtime/training, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) => 1,
            Error::Protocol(_) | Error::Training { .. } => 2,
            Error::Format { .. } | Error::Io { .. } => 3,
        }
    }
}
