use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// The variants map onto the CLI's exit-code classes: parameter errors,
/// data errors (shape, parse, I/O) and numerical/conditioning failures.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("non-finite value {value} at point {index} {point:?}")]
    NonFinite {
        index: usize,
        point: Vec<f64>,
        value: f64,
    },

    #[error("duplicate training inputs at indices {first} and {second} with different outputs")]
    DuplicateInputs { first: usize, second: usize },

    #[error(
        "Gram matrix is numerically singular even with jitter {max_jitter:e}; \
         smallest eigenvalue estimate {min_eigenvalue:e}"
    )]
    Conditioning {
        max_jitter: f64,
        min_eigenvalue: f64,
    },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("unsupported format version {found} (this build reads version {supported})")]
    Version { found: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// Coarse error class: `Parameter`, `Data` or `Numerical`.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parameter(_) => ErrorClass::Parameter,
            Error::Conditioning { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Parameter,
    Data,
    Numerical,
}

pub type Result<T> = std::result::Result<T, Error>;
