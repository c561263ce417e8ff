use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error("unsupported bit depth in {path}: {detail}")]
    UnsupportedBitDepth { path: PathBuf, detail: String },

    #[error("corrupt or undecodable stream in {path}: {detail}")]
    CorruptStream { path: PathBuf, detail: String },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },

    #[error("shape/payload mismatch: header declares {declared} values, payload holds {actual}")]
    ShapeMismatch { declared: usize, actual: usize },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid mask value {value} at pixel ({x}, {y})")]
    InvalidMaskValue { value: u8, x: u32, y: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not enough features: {count} features for {k} clusters")]
    TooFewFeatures { count: usize, k: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("missing membership for segment {0}")]
    MissingMembership(usize),

    #[error("too many segments for a 16-bit label map: {0}")]
    TooManySegments(usize),

    #[error("unmatched files: missing in ground truth {missing_in_gt:?}, missing in predictions {missing_in_pred:?}")]
    Unmatched { missing_in_gt: Vec<String>, missing_in_pred: Vec<String> },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
