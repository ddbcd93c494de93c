use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument violating a precondition (shape, count, emptiness).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Matrix factorization failed even after jitter escalation.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The approximation-error metric is undefined when the gold maximum is not positive.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Malformed or unusable input data.
    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
