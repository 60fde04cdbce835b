//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CtdError {
    #[error("dimension mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("index {index} out of range for {what} of size {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("unsatisfiable request: {0}")]
    Unsatisfiable(String),

    #[error("insufficient phrases: {0}")]
    InsufficientPhrases(String),

    #[error("protocol mismatch: expected {expected}, found {found}")]
    Protocol { expected: String, found: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("missing decompose checkpoint")]
    MissingCheckpoint,

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CtdError>;

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> CtdError {
    CtdError::Shape {
        op,
        detail: detail.into(),
    }
}
