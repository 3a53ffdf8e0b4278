use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("unknown primitive kind `{0}`")]
    UnknownKind(String),

    #[error("{op}: non-finite value in output")]
    NonFinite { op: &'static str },

    #[error("backward seed must be a scalar, got {numel} elements")]
    NotScalar { numel: usize },

    #[error("{op}: {detail}")]
    InvalidArg { op: &'static str, detail: String },

    #[error("solver: {0}")]
    Solver(String),

    #[error("training: {0}")]
    Train(String),

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn arg(op: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArg {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
