//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("power iteration did not converge within {iterations} iterations (best estimate {best:.6e}, residual {residual:.3e})")]
    LambdaMaxNoConvergence {
        best: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("operator is not positive semidefinite (lambda_min estimate {lambda_min:.3e})")]
    NotPsd { lambda_min: f64 },

    #[error("operator is not majorizable: lambda_l = {lambda_l:.3e} <= 0")]
    NotMajorizable { lambda_l: f64 },

    #[error("dimension {dim} exceeds dense cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("unsupported nonsmooth kind for this operation: {0}")]
    UnsupportedKind(String),

    #[error("unsupported subproblem metric/nonsmooth combination: {0}")]
    UnsupportedSubproblem(String),

    #[error("subproblem solve failed: {0}")]
    SubproblemFailure(String),

    #[error("ergodic average requested before any averaged iterate exists")]
    EmptyAverage,

    #[error("oracle certification failed: eps_kkt_sq = {eps:.3e} exceeds {threshold:.3e}")]
    OracleCertification { eps: f64, threshold: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(String),
}

impl From<csv::Error> for SolverError {
    fn from(e: csv::Error) -> Self {
        SolverError::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SolverError>;
