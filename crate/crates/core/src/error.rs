use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EosError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("power iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    PowerIterationNoConvergence { iterations: usize, last_change: f64 },

    #[error("sharpness was not recorded for this trajectory")]
    SharpnessNotRecorded,

    #[error("trajectory did not converge")]
    NotConverged,

    #[error("limit does not interpolate sample {index}: residual {residual:e}")]
    NotInterpolating { index: usize, residual: f64 },

    #[error("too few usable points for a fit: {0}")]
    TooFewPoints(usize),

    #[error("x = 0 leaves the point undefined")]
    DegenerateX,

    #[error("malformed schedule: {0}")]
    Schedule(String),
}

pub type Result<T> = std::result::Result<T, EosError>;
