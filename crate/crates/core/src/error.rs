use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GraphSslError>;

#[derive(Debug, Error)]
pub enum GraphSslError {
    #[error("insufficient label diversity: {0}")]
    InsufficientLabels(String),

    #[error("covariance singular; raise regularization ({which} pairs)")]
    SingularCovariance { which: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("k exceeds available neighbors (k={k}, n={n})")]
    TooManyNeighbors { k: usize, n: usize },

    #[error("degenerate dataset: zero bandwidth")]
    ZeroBandwidth,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("affinity not symmetric at ({i},{j})")]
    AsymmetricAffinity { i: usize, j: usize },

    #[error("NMF requires nonnegative input (entry ({i},{j}) = {value})")]
    NegativeInput { i: usize, j: usize, value: f64 },

    #[error("non-finite entry at ({i},{j})")]
    NonFinite { i: usize, j: usize },

    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("empty file: {0}")]
    EmptyFile(PathBuf),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("class {class} has {available} samples, {requested} requested")]
    ClassTooSmall {
        class: usize,
        available: usize,
        requested: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GraphSslError {
    /// Process exit code for the command-line front end: 1 for configuration
    /// problems, 2 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            GraphSslError::Config(_) | GraphSslError::InvalidParameter(_) => 1,
            _ => 2,
        }
    }
}
