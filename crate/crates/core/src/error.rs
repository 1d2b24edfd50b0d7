use thiserror::Error;

/// Errors produced by the matching engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("hOCR parse error: {0}")]
    Hocr(String),

    #[error("document validation error: {0}")]
    Document(String),

    #[error("table error: {0}")]
    Table(String),

    #[error("embedding error: {0}")]
    Embedding(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{format} format error: {reason}")]
    Format { format: &'static str, reason: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}; consider enabling hinge_margin to bound the objective")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("index error: {0}")]
    Index(String),

    #[error("match error: {0}")]
    Match(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format { format, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
