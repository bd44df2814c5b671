use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("parse error at row {row}: {message}")]
    Parse { row: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("XES error: {0}")]
    Xes(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("test set is empty after prefix generation")]
    EmptyTestSet,

    #[error("need at least {needed} cases, got {got}")]
    NotEnoughCases { needed: usize, got: usize },

    #[error("non-finite value in {tensor} at index {index}")]
    NumericFault { tensor: String, index: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model file: {0}")]
    Model(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
