use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix has deficient row rank")]
    RankDeficient,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("fit failed at every start: {0}")]
    FitFailed(String),

    #[error("numerical health check failed: {0}")]
    Numerical(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
