use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("every semantic part is disabled; nothing to render")]
    EmptyScene,

    #[error("invalid scene recipe: {0}")]
    InvalidRecipe(String),

    #[error("garment `{part}` shell around bone `{bone}` leaves the scene bounds")]
    ShellOutsideBounds { part: String, bone: String },

    #[error("unknown bone `{0}`")]
    UnknownBone(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("worker pool: {0}")]
    Threads(String),

    #[error("png: {0}")]
    Png(String),
}

impl Error {
    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }
}

impl From<png::EncodingError> for Error {
    fn from(e: png::EncodingError) -> Self {
        Error::Png(e.to_string())
    }
}

impl From<png::DecodingError> for Error {
    fn from(e: png::DecodingError) -> Self {
        Error::Png(e.to_string())
    }
}
