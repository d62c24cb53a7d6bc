use thiserror::Error;

/// Errors raised by the filtering, diagnostics and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("non-finite entry encountered")]
    NonFinite,
    #[error("kernel bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("fixed-point iteration diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("weighted design Gram matrix is singular (minimum eigenvalue {min_eigenvalue:e})")]
    SingularDesign { min_eigenvalue: f64 },
    #[error("beta = {beta} does not exceed zeta = {zeta}")]
    BetaTooSmall { beta: f64, zeta: f64 },
    #[error("no root bracket for {0} within the bandwidth search range")]
    BracketNotFound(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, FilterError>;
