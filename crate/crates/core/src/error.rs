use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is not square ({rows} rows, row of length {cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not positive definite even with jitter {max_jitter:e}")]
    NotPositiveDefinite { max_jitter: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Failure inside a model evaluation (forward solve, density).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("log density evaluated to NaN at {theta:?}")]
    NanDensity { theta: Vec<f64> },
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("parameter has dimension {got}, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid model setup: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("level {level}: {chain} chain rejected {count} consecutive proposals")]
    Stalled {
        level: usize,
        chain: &'static str,
        count: usize,
    },
    #[error("maximal coupling exceeded {0} rejection-loop iterations")]
    CouplingLoop(usize),
    #[error("invalid sampler setup: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("series needs at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("series has zero variance")]
    ZeroVariance,
}
