use thiserror::Error;

/// Errors raised across the ray-based classification pipeline.
#[derive(Debug, Error)]
pub enum RbcError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("ray {ray} leaves the voltage domain at {point_mv:?} mV")]
    OutOfRange { ray: usize, point_mv: [f64; 2] },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RbcError>;
