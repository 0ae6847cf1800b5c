//! Harness-level errors.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data file not found or unreadable: {0}")]
    DataNotFound(String),

    #[error("signal is identically zero")]
    ZeroSignal,

    #[error("ROC needs at least one positive and one negative edge")]
    DegenerateTruth,

    #[error(transparent)]
    Core(#[from] gtf_core::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
