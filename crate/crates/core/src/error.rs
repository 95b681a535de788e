use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("label sets overlap on `{0}`")]
    OverlappingLabels(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("not a valid state: {0}")]
    InvalidState(String),

    #[error("not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension overflow: total dimension {0} exceeds the limit {1}")]
    DimensionOverflow(usize, usize),

    #[error("illegal protocol step {step}: {reason}")]
    IllegalStep { step: usize, reason: String },

    #[error("numerical method did not converge: {0}")]
    NonConvergence(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
