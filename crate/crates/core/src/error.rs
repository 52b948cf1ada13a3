use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("insufficient data: need at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("undefined relative error: the true record has zero norm")]
    ZeroNorm,

    #[error("no orthogonal matrix maps the linked inputs onto the linked outputs: {0}")]
    Infeasible(String),

    #[error("attack infeasible: {0}")]
    AttackInfeasible(String),

    #[error("linking exceeded its time budget of {0:?}")]
    TimeBudget(std::time::Duration),

    #[error("exhaustive sign search over {dim} dimensions exceeds the cap of {cap}")]
    SearchBudget { dim: usize, cap: usize },

    #[error("parse error in {path} at row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
