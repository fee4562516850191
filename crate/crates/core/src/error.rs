use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid exponent p = {0}; need p >= 1")]
    InvalidExponent(f64),

    #[error("function is not nondecreasing (cell {index}: {left} > {right})")]
    NotMonotone { index: usize, left: f64, right: f64 },

    #[error("function is not convex (slope {index}: {left} > {right}); apply the convex envelope first")]
    NotConvex { index: usize, left: f64, right: f64 },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid cost: {0}")]
    InvalidCost(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("states are not on a common trajectory: {0}")]
    NotOnTrajectory(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
