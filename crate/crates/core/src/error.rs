use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("label {label} out of range 1..={num_labels}")]
    LabelOutOfRange { label: usize, num_labels: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cost matrix is not reasonable: {0}")]
    NotReasonable(String),

    #[error("point is not on the manifold surface (residual {residual:e})")]
    OffSurface { residual: f64 },

    #[error("point lies outside the support of the distribution")]
    OffSupport,

    #[error("index has no projection attached")]
    NoProjection,

    #[error("degenerate ratio: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
