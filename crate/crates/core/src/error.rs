use thiserror::Error;

/// Errors raised by the estimators and file readers in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("malformed structure: {0}")]
    Structure(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("solver stopped after {iterations} iterations with residual {residual:e}: {message}")]
    Solver {
        iterations: usize,
        residual: f64,
        message: String,
    },
    #[error("singular linear system: {0}")]
    LinearAlgebra(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("smoothing failed: {0}")]
    Smoothing(String),
    #[error("transform diverged at step {step}: {message}")]
    Divergence { step: usize, message: String },
    #[error("invalid density: {0}")]
    InvalidDensity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
