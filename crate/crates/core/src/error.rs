use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("row count mismatch: {left} embedding rows vs {right} manifest rows")]
    RowCountMismatch { left: usize, right: usize },

    #[error("tile order mismatch at row {row}: embeddings have `{embedding}`, manifest has `{manifest}`")]
    TileOrderMismatch {
        row: usize,
        embedding: String,
        manifest: String,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown node {0}")]
    UnknownNode(u64),

    #[error("node {node}: {message}")]
    Tree { node: u64, message: String },

    #[error("tree version conflict: expected {expected}, current {current}")]
    Conflict { expected: u64, current: u64 },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("optimizer did not converge after {iterations} iterations (subgradient norm {grad_norm:e}, objective {objective})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        objective: f64,
    },

    #[error("coefficients diverged (max |beta * sd| = {scaled_norm:.3e} after {iterations} iterations); covariates may perfectly separate the outcome")]
    Diverged { iterations: usize, scaled_norm: f64 },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
