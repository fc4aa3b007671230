use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SilrError {
    #[error("non-finite sample value at x = {0}")]
    NonFinite(f64),
    #[error("resolution not reached below degree cap {0}")]
    Resolution(usize),
    #[error("point {0} outside the domain")]
    Domain(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("rank deficient at column {0}")]
    RankDeficient(usize),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("iterate diverged in epoch {0}")]
    Divergence(usize),
    #[error("kernel matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, SilrError>;
