//! Error type shared by the algebra and file-format code.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Array shapes are incompatible for the requested operation.
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A value violates a domain invariant (range, class count, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A persisted file does not match the documented layout.
    #[error("format error in {path}: {detail}")]
    Format { path: String, detail: String },

    /// Malformed configuration text.
    #[error("config error at line {line}: {detail}")]
    Config { line: usize, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CoreError {
    pub fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        CoreError::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
