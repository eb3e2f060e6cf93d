//! Error type shared by the whole crate.

use thiserror::Error;

/// Failure cases surfaced by library calls.
///
/// `category()` gives the stable machine-readable token the CLI prints in
/// its `error: <category>: <message>` line, so variants here are part of
/// the external interface.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A detection sidecar, config, or report failed to parse or validate.
    /// `context` names the frame id / field so batch users can find the
    /// offending entry.
    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    /// Frame dimensions or channel counts disagree where they must match.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A numeric routine could not produce a meaningful result
    /// (e.g. statistics requested over too few pixels).
    #[error("numeric: {0}")]
    Numeric(String),

    /// Underlying file or image I/O failed.
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Stable lowercase token for CLI error lines and FFI status codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Parse { .. } => "parse",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::Numeric(_) => "numeric",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Io(e.to_string())
    }
}
