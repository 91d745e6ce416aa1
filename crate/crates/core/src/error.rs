use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("case structure: {0}")]
    Structure(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("zero distance between connected buses {from} and {to}")]
    DegenerateWeight { from: u32, to: u32 },

    #[error("bus {0} has no coordinates")]
    MissingCoordinates(u32),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("undefined value: {0}")]
    Undefined(String),

    #[error("infeasible topology: {0}")]
    InfeasibleTopology(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("insufficient history: need {needed} steps, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn mismatch(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }
}
