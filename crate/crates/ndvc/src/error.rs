//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by codec, container, and pipeline operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed file header or magic bytes.
    #[error("format error: {0}")]
    Format(String),

    /// Recognized container but a feature or version we do not handle.
    #[error("unsupported format: {0}")]
    Unsupported(String),

    /// Bit reader ran past the end of its buffer.
    #[error("truncated stream: {0}")]
    Truncated(String),

    /// Stream structure is internally inconsistent (bad lengths, illegal
    /// syntax elements, decisions that do not fit the frame).
    #[error("corrupt stream: {0}")]
    Corruption(String),

    /// A prediction mode that is not legal at the given block position.
    #[error("invalid prediction mode: {0}")]
    ModeInvalid(String),

    /// Inputs whose shapes must agree do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Parameter outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A required artifact is absent from a manifest or catalog.
    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    /// Wire-protocol violation on the segment server.
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, Error>;
