//! Crate-wide error type.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the estimator, steppers, analysis routines, and CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("history window underflow: need {needed} samples, have {have}")]
    WindowUnderflow { needed: usize, have: usize },

    #[error("dimension mismatch: expected {expected} components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("solution diverged at step {step}: |y| exceeded {guard:e}")]
    Divergence { step: usize, guard: f64 },

    #[error("unknown problem '{name}'; catalog: {available}")]
    UnknownProblem { name: String, available: String },

    #[error("cannot parse scheme spec '{spec}': {reason}")]
    SchemeParse { spec: String, reason: String },

    #[error("bracket [{lo}, {hi}] does not straddle the stability boundary: {reason}")]
    BadBracket { lo: f64, hi: f64, reason: String },

    #[error("order study run diverged at h = {h} (step {step})")]
    OrderDiverged { h: f64, step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 3 for divergence, 1 for i/o,
    /// 2 for configuration and parameter errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } | Error::OrderDiverged { .. } => 3,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}
