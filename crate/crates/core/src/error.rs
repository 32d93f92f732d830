use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Structurally invalid input (bad indices, inconsistent groups, ...).
    #[error("validation error: {0}")]
    Validation(String),
    /// Requested dimension exceeds the configured cap.
    #[error("resource error: {0}")]
    Resource(String),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// Estimator denominator below the configured floor.
    #[error("ill-conditioned estimate: |denominator| = {denominator:e} below floor {floor:e}")]
    IllConditioned { denominator: f64, floor: f64 },
    /// Dominant and sub-dominant eigenvalues coincide.
    #[error("degenerate gap: dominant eigenvalue {0} is not separated from the sub-dominant one")]
    DegenerateGap(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
