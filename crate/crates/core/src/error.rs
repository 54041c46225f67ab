use thiserror::Error;

/// Errors raised anywhere in the acquisition and reconstruction stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("window out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("degenerate band {band}: min equals max ({value})")]
    DegenerateBand { band: usize, value: f64 },

    #[error("budget infeasible: {0}")]
    BudgetInfeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image codec error: {0}")]
    Codec(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
