use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum MedseqError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row}, column '{column}': {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("inadmissible model: {0}")]
    Inadmissible(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("component {component} became empty at iteration {iteration}")]
    EmptyComponent { component: usize, iteration: usize },
    #[error("rank-deficient gating design: {0}")]
    RankDeficient(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
}

impl MedseqError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MedseqError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, MedseqError>;
