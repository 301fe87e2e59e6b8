use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library.
///
/// Variants fall into three classes (see [`ErrorClass`]) so front ends can map
/// them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid camera `{id}`: {reason}")]
    InvalidCamera { id: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid skeleton: {0}")]
    Skeleton(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("heatmap file has bad magic {found:?}, expected \"HMS1\"")]
    BadMagic { found: [u8; 4] },

    #[error("heatmap file truncated while reading {what}")]
    Truncated { what: &'static str },

    #[error("heatmap contains non-finite value at joint {joint}, row {row}, column {col}")]
    NonFinite { joint: usize, row: usize, col: usize },

    #[error("empty limb-length shell for edge ({i}, {j}): increase the tolerance or refine the grid")]
    EmptyShell { i: usize, j: usize },

    #[error("degenerate posterior for joint {joint} (`{name}`): no mass left after message passing")]
    DegeneratePosterior { joint: usize, name: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Coarse classification of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration or malformed model/calibration input.
    Config,
    /// Bad or missing data (heatmaps, poses, documents).
    Data,
    /// The posterior collapsed during inference.
    Degenerate,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidCamera { .. }
            | Error::Config(_)
            | Error::Skeleton(_)
            | Error::EmptyShell { .. } => ErrorClass::Config,
            Error::DegeneratePosterior { .. } => ErrorClass::Degenerate,
            Error::Context { source, .. } => source.class(),
            Error::InvalidInput(_)
            | Error::BadMagic { .. }
            | Error::Truncated { .. }
            | Error::NonFinite { .. }
            | Error::Io { .. }
            | Error::Json { .. } => ErrorClass::Data,
        }
    }

    /// Wraps the error with a human-readable location such as a frame id.
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
