use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by the kind of failure so callers (notably the CLI)
/// can map them onto exit codes: configuration/usage problems, numeric
/// failures, and I/O failures are distinguishable.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: lhs {lhs:?} vs rhs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("index {index} out of range for axis of length {len} in {op}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid parameter for {op}: {message}")]
    InvalidParameter { op: &'static str, message: String },

    #[error("numeric failure in {op}: {message}")]
    Numeric { op: &'static str, message: String },

    #[error("contract violation in {op}: {message}")]
    Contract { op: &'static str, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },

    #[error("checkpoint config mismatch: expected {expected}, found {found}")]
    Version { expected: String, found: String },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Coarse failure class, used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::ShapeMismatch { .. }
            | Error::IndexOutOfRange { .. }
            | Error::InvalidParameter { .. }
            | Error::Contract { .. }
            | Error::Config(_)
            | Error::Parse { .. }
            | Error::Version { .. } => ErrorKind::Config,
            Error::Numeric { .. } | Error::Solver(_) => ErrorKind::Numeric,
            Error::Format { .. } | Error::Io(_) => ErrorKind::Io,
        }
    }
}

/// Coarse error classes; the CLI maps these to exit codes 2, 3 and 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numeric,
    Io,
}

pub type Result<T> = std::result::Result<T, Error>;
