use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of `.npy` decoding. Each maps to its own error code.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NpyError {
    #[error("bad magic: not an npy file")]
    BadMagic,
    #[error("unsupported npy version {0}.{1}")]
    UnsupportedVersion(u8, u8),
    #[error("malformed npy header: {0}")]
    BadHeader(String),
    #[error("unsupported dtype descriptor {0:?}")]
    UnsupportedDtype(String),
    #[error("fortran-order arrays are not supported")]
    FortranOrder,
    #[error("unsupported array rank {0} (expected 2 or 3)")]
    UnsupportedRank(usize),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

impl NpyError {
    pub fn code(&self) -> &'static str {
        match self {
            NpyError::BadMagic => "npy-bad-magic",
            NpyError::UnsupportedVersion(..) => "npy-unsupported-version",
            NpyError::BadHeader(_) => "npy-bad-header",
            NpyError::UnsupportedDtype(_) => "npy-unsupported-dtype",
            NpyError::FortranOrder => "npy-fortran-order",
            NpyError::UnsupportedRank(_) => "npy-unsupported-rank",
            NpyError::Truncated { .. } => "npy-truncated",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tile size {0}: must be a positive multiple of 4")]
    InvalidTileSize(usize),

    #[error("image {height}x{width} is smaller than tile size {tile}")]
    ImageTooSmall { height: usize, width: usize, tile: usize },

    #[error("invalid grid index {0}: must be in 0..8")]
    InvalidGrid(usize),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("window at ({row}, {col}) of size {size} exceeds {height}x{width} bounds")]
    OutOfBounds { row: usize, col: usize, size: usize, height: usize, width: usize },

    #[error("tile set needs {required} bytes but the sink accepts at most {capacity}")]
    StorageExceeded { required: u64, capacity: u64 },

    #[error("incomplete coverage: {} window(s) missing, first at {:?}", missing.len(), missing.first())]
    IncompleteCoverage { missing: Vec<(usize, usize)> },

    #[error("{path}: {source}")]
    Npy { path: PathBuf, source: NpyError },

    #[error("corrupt tile set: {0}")]
    Corruption(String),

    #[error("corrupt tile set: tile {tile_id} is missing or unreadable ({reason})")]
    MissingTile { tile_id: usize, reason: String },

    #[error("{0}")]
    Usage(String),

    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Stable, machine-readable error class.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidTileSize(_) => "invalid-tile-size",
            Error::ImageTooSmall { .. } => "image-too-small",
            Error::InvalidGrid(_) => "invalid-grid",
            Error::Shape(_) => "shape",
            Error::OutOfBounds { .. } => "out-of-bounds",
            Error::StorageExceeded { .. } => "out-of-storage",
            Error::IncompleteCoverage { .. } => "incomplete-coverage",
            Error::Npy { source, .. } => source.code(),
            Error::Corruption(_) | Error::MissingTile { .. } => "corruption",
            Error::Usage(_) => "usage",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
