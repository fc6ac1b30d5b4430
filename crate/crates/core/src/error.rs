use std::path::PathBuf;

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index {index} out of range for {len} organizations")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid action profile: {0}")]
    InvalidProfile(String),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("profiles differ in more than one coordinate")]
    NotUnilateral,
    #[error("enumeration needs {required} profiles, budget is {budget}; reduce the grid size or the number of organizations")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("episode already finished at slot {0}")]
    EpisodeFinished(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("tape was recorded against parameter version {tape}, network is at version {net}")]
    StaleTape { tape: u64, net: u64 },
    #[error("non-finite gradient: {0}")]
    NonFiniteGradient(String),
    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("malformed checkpoint {path:?}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
