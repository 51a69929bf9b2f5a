use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Checker verdicts (assumption violations, monitor failures) are never
/// reported through this type; they live in the respective report structs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported query: {0}")]
    UnsupportedQuery(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
