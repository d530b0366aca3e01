//! Crate-wide error type.

use thiserror::Error;

/// Error type for every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or arguments (dimension mismatches, bad
    /// hyperparameters, budget violations).
    #[error("configuration error: {0}")]
    Config(String),

    /// A computation produced a non-finite value or otherwise left the
    /// numeric domain it was specified for.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A file did not match the expected binary format.
    #[error("format error in {path} at offset {offset}: {detail}")]
    Format {
        path: String,
        offset: u64,
        detail: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code for the CLI: 2 for validation problems, 3 for
    /// numeric failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Format { .. } => 2,
            Error::Numeric(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
