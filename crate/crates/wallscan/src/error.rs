//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by the library.
///
/// Fatal conditions only; per-point problems (empty cylinder, missing
/// footprint, rejected correspondence) are reported through validity flags
/// on the result types instead.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An operation that needs data received none.
    #[error("empty input: {context}")]
    EmptyInput { context: String },

    /// Input exists but spans too little of space to be usable
    /// (collinear plane fit, zero-area bounding box, < 3 target pairs, ...).
    #[error("degenerate input: {context}")]
    Degenerate { context: String },

    /// A parameter violates its documented range.
    #[error("invalid parameter: {message}")]
    InvalidParameter { message: String },

    /// A coordinate was NaN or infinite.
    #[error("non-finite coordinate at point index {index}")]
    NonFinite { index: usize },

    /// A file could not be parsed; `line` is 1-based.
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Underlying I/O failure, tagged with the offending path. The
    /// `io::Error` is carried as `source()` rather than repeated in the
    /// message, so chain-printing reporters show it exactly once.
    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Registration could not produce a usable alignment.
    #[error("registration failed: {message}")]
    Registration { message: String },

    /// Triangulation could not be built.
    #[error("meshing failed: {message}")]
    Meshing { message: String },
}

impl Error {
    pub(crate) fn empty(context: impl Into<String>) -> Self {
        Error::EmptyInput { context: context.into() }
    }

    pub(crate) fn degenerate(context: impl Into<String>) -> Self {
        Error::Degenerate { context: context.into() }
    }

    pub(crate) fn param(message: impl Into<String>) -> Self {
        Error::InvalidParameter { message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
