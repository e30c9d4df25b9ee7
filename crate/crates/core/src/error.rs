use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exhaustive enumeration over {size} binary variables exceeds the cap of {cap}")]
    EnumerationCap { size: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The rotation needs a strictly positive spectrum.
    #[error("correlation matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("self-consistency denominator {value:.3e} is numerically singular")]
    SingularDenominator { value: f64 },

    #[error("no ergodicity transition bracketed in T = [{lo}, {hi}] for a = {a}")]
    NoTransition { a: f64, lo: f64, hi: f64 },

    #[error("malformed pattern file {path}: {reason}")]
    PatternFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
