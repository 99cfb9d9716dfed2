use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested foot pixel lies on (or beyond) the horizon, so the
    /// projective scale is unbounded.
    #[error("point at infinity: foot pixel ({u}, {v}) is not below the horizon")]
    PointAtInfinity { u: f64, v: f64 },

    #[error("projection domain: point is not in front of the image plane")]
    ProjectionDomain,

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("format error in {path}: {message}", path = .path.display())]
    Format { path: PathBuf, message: String },

    /// A scene-document validation failure naming the offending field.
    #[error("{location}: {field}: {message}")]
    Scene {
        location: String,
        field: String,
        message: String,
    },

    #[error("missing benchmark items: {0:?}")]
    MissingItems(Vec<String>),

    #[error("render cancelled")]
    Cancelled,

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: msg.into(),
        }
    }
}
