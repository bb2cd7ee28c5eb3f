use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite (pivot {pivot} is {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not symmetric: relative asymmetry {0:e} exceeds 1e-8")]
    Asymmetric(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-regular prior: mode multiplier {0} is not positive")]
    NonRegularPrior(f64),

    #[error("value outside the parameter support: {0}")]
    Support(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("column selection is empty")]
    EmptySelection,

    #[error("dataset has no observations")]
    EmptyDataset,

    #[error("scatter matrix is degenerate: {0}")]
    DegenerateScatter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("limit exceeded: {0}")]
    LimitExceeded(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Whether the error comes from bad input or configuration rather than
    /// from a numerical failure on otherwise valid input.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::EmptySelection
                | Error::InvalidConfig(_)
                | Error::Io(_)
                | Error::DimensionMismatch { .. }
                | Error::LimitExceeded(_)
                | Error::Asymmetric(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
