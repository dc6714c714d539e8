use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The likelihood has no finite interior maximum (separation, all
    /// observations censored, unbounded likelihood).
    #[error("model violation: {0}")]
    ModelViolation(String),

    /// The MLE runs off to the boundary of the parameter space.
    #[error("boundary divergence: {0}")]
    BoundaryDivergence(String),

    #[error("oracle degraded: {failures} of {total} replicates failed")]
    OracleDegraded { failures: usize, total: usize },

    #[error(
        "calibration failed at alpha={alpha}: residual {residual:.4} after {iterations} iterations"
    )]
    CalibrationFailed {
        alpha: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),

    #[error("empty interval: alpha={alpha} exceeds contour maximum {max}")]
    EmptyInterval { alpha: f64, max: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
