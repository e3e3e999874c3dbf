use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: timestamp regression for instrument {instrument}")]
    Ordering { line: u64, instrument: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty matrix: {0}")]
    EmptyMatrix(String),

    #[error("degenerate period {period}: zero-norm column")]
    DegeneratePeriod { period: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("brute-force enumeration refused for N = {0} (limit 12)")]
    TooLarge(usize),

    #[error("power-law fit needs at least 2 tail points, got {0}")]
    InsufficientTail(usize),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("unknown state {0}")]
    UnknownState(u32),

    #[error("no state signature vectors to match against")]
    NoStates,

    #[error("period {0} not present in returns matrix")]
    PeriodNotFound(String),

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("invalid binary correlation file: {0}")]
    BadBinary(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
