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

    /// Malformed input file. `location` is a line number for text formats and
    /// a byte offset for binary ones.
    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no triangle centroid within the support radius")]
    EmptyPatch,

    #[error("every triangle of the patch is degenerate")]
    DegeneratePatch,

    #[error("ill-conditioned reference frame (relative eigen-gap {relative_gap:e})")]
    IllConditioned { relative_gap: f64 },

    #[error("every triangle was skipped; descriptor is all zeros")]
    EmptyDescriptor,

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate output: {0}")]
    DegenerateOutput(String),

    #[error("ground truth correspondence set is empty; recall is undefined")]
    EmptyGroundTruth,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by unreadable or unwritable files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
