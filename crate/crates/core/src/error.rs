use thiserror::Error;

/// Errors produced by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at position {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("duplicate index {index}")]
    DuplicateIndex { index: usize },

    #[error("empty box: lower bound {lower} is not below upper bound {upper} at index {index}")]
    EmptyBox { index: usize, lower: f64, upper: f64 },

    #[error("correlation {rho} is outside (-1, 1)")]
    CorrelationOutOfRange { rho: f64 },

    #[error("truncation mass too small to normalize (alpha {alpha:e}, error {error:e})")]
    AlphaTooSmall { alpha: f64, error: f64 },

    #[error("dimension {dim} exceeds the supported maximum of {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("dimension mismatch: {what}")]
    DimensionMismatch { what: String },

    #[error("the set of untruncated variables is empty")]
    EmptyFreeSet,

    #[error("acceptance rate too low for rejection sampling (alpha {alpha:e})")]
    AcceptanceTooLow { alpha: f64 },

    #[error("assembled covariance is asymmetric by {asymmetry:e}; integration failed")]
    IntegrationFailure { asymmetry: f64 },

    #[error("argument outside the domain: {what}")]
    Domain { what: String },

    #[error("invalid configuration: {what}")]
    InvalidConfig { what: String },
}

impl Error {
    /// Stable short name of the error kind, used on diagnostic streams.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::DuplicateIndex { .. } => "DuplicateIndex",
            Error::EmptyBox { .. } => "EmptyBox",
            Error::CorrelationOutOfRange { .. } => "CorrelationOutOfRange",
            Error::AlphaTooSmall { .. } => "AlphaTooSmall",
            Error::DimensionTooLarge { .. } => "DimensionTooLarge",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptyFreeSet => "EmptyFreeSet",
            Error::AcceptanceTooLow { .. } => "AcceptanceTooLow",
            Error::IntegrationFailure { .. } => "IntegrationFailure",
            Error::Domain { .. } => "DomainError",
            Error::InvalidConfig { .. } => "InvalidConfig",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
