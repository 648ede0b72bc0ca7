use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the retouching stack.
#[derive(Debug, Error)]
pub enum ArtError {
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png decode error in {path}: {message}")]
    Png { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = ArtError> = std::result::Result<T, E>;

impl ArtError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ArtError::Io {
            path: path.into(),
            source,
        }
    }
}
