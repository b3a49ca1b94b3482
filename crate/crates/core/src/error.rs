use thiserror::Error;

/// Errors produced by the analysis pipeline, partitioned into the three
/// classes the CLI maps onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or configuration.
    #[error("argument error: {0}")]
    Argument(String),
    /// Malformed or unsupported audio input.
    #[error("decode error: {0}")]
    Decode(String),
    /// Estimation failed on otherwise valid input.
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn decode(msg: impl Into<String>) -> Self {
        Error::Decode(msg.into())
    }

    pub fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
