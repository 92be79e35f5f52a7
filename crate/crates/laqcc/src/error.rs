use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Capacity errors are kept separate because the command line maps them to a
/// distinct exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("branch error: {0}")]
    Branch(String),
    #[error("recycle error: {0}")]
    Recycle(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("model error: {0}")]
    Model(String),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
