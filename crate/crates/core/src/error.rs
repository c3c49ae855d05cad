use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid kernel parameters: alpha = {alpha}, n = {n}")]
    InvalidKernel { alpha: f64, n: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("solver did not converge after {iterations} iterations (kkt residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("system too large for enumeration: {0} unknowns")]
    TooLarge(usize),

    #[error("empty point cloud: {0}")]
    EmptyCloud(&'static str),

    #[error("point {point:?} is outside {set}")]
    OutsideSet { point: Vec<f64>, set: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
