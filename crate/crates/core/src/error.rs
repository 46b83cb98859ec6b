//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error.
///
/// The variants map onto the process exit codes used by the harness:
/// configuration problems exit 2, capacity overruns exit 3, everything else
/// exits 1.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The requested problem size exceeds a documented hard cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A numerical routine failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A file could not be read, written, or parsed.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// A serialized artifact has an unexpected layout or version.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
