use thiserror::Error;

use crate::mdp::Cell;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layout line {line}: {message}")]
    Layout { line: usize, message: String },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("state index {0} is out of range")]
    InvalidState(usize),

    #[error("cell ({}, {}) is not an open cell", .0.row, .0.col)]
    InvalidCell(Cell),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("vector length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("demonstration step {index}: {message}")]
    Demonstration { index: usize, message: String },

    #[error("{code}: {message}")]
    Phase { code: &'static str, message: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
