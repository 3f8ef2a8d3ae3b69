use thiserror::Error;

use crate::event::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration, malformed input, or violated invariant.
    Config,
    Io,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid stream: {0}")]
    Invalid(Violation),

    #[error("bad magic")]
    BadMagic,

    #[error("truncated header")]
    TruncatedHeader,

    #[error("truncated payload: header declares {declared} events but {remaining} payload bytes remain")]
    TruncatedPayload { declared: u64, remaining: usize },

    #[error("invalid polarity at event {index}")]
    InvalidPolarity { index: usize },

    #[error("header mismatch: expected \"x,y,t,p\", found {found:?}")]
    CsvHeader { found: String },

    #[error("malformed line {line}: {reason}")]
    CsvLine { line: usize, reason: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("config: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) => ErrorClass::Io,
            Error::Numeric(_) => ErrorClass::Numeric,
            _ => ErrorClass::Config,
        }
    }
}
