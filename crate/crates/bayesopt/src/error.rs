use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoError {
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("no training data")]
    EmptyData,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("inputs and outputs differ in length ({inputs} points, {outputs} values)")]
    LengthMismatch { inputs: usize, outputs: usize },
    #[error("covariance factorization failed even with jitter {jitter:e}")]
    Factorization { jitter: f64 },
    #[error("every initial evaluation failed; last error: {0}")]
    AllEvaluationsFailed(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}
