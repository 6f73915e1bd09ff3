//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by dataset construction, training, inference and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was called on an object in an unusable state.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A numeric computation produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A persisted artifact failed validation; the message names the offending field.
    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },

    /// A computation whose result is undefined for the given data.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn invalid_state(msg: impl Into<String>) -> Self {
        Error::InvalidState(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
