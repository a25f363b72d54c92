use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("node index {index} out of range for n = {n}")]
    Index { index: usize, n: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("approximation failure at step {step}: residual {residual:.4e} > {target:.4e} at degree {degree}")]
    Approximation {
        step: usize,
        residual: f64,
        target: f64,
        degree: usize,
    },
    #[error("refused: {0}")]
    Refused(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
