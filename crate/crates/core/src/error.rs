//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Construction or operation received a shape that cannot work
    /// (empty image, mismatched buffer length, window larger than image, ...).
    #[error("shape error: {0}")]
    Shape(String),

    /// An image with zero dynamic range cannot be normalized.
    #[error("degenerate dynamic range: image is constant")]
    DegenerateRange,

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Non-finite sample value encountered where finite data is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A stored trace or manifest does not match the data it is replayed on.
    #[error("trace mismatch: {0}")]
    TraceMismatch(String),

    /// Malformed binary or JSON payload.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
