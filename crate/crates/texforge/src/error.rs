//! Crate-wide error type.
//!
//! Variants are grouped by how callers should react: `InvalidArgument` and
//! the data-shaped variants (`MeshParse`, `Manifest`, `Checkpoint`, …) are
//! validation failures, while `Training`/`Sampling` report numerical
//! breakdown (non-finite values) during model execution.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Mesh text could not be parsed; `line` is 1-based.
    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    /// Image decode/encode or pixel-format failure.
    #[error("image error: {0}")]
    Image(String),

    /// Patch capture failed (out-of-bounds rectangle, insufficient coverage).
    #[error("capture error: {0}")]
    Capture(String),

    /// Dataset forging failed (for example, too many skipped pairs).
    #[error("forge error: {0}")]
    Forge(String),

    /// Manifest validation failed; the message names the offending entry.
    #[error("manifest error: {0}")]
    Manifest(String),

    /// Checkpoint serialization, integrity, or compatibility failure.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Non-finite loss or gradient during training.
    #[error("training error at step {step}: {msg}")]
    Training { step: usize, msg: String },

    /// Non-finite intermediate state during sampling.
    #[error("sampling error at step {step}: {msg}")]
    Sampling { step: usize, msg: String },

    /// A referenced file is missing or unreadable.
    #[error("missing file {path}: {msg}")]
    MissingFile { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by numerical breakdown rather than bad data.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Training { .. } | Error::Sampling { .. })
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
