use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A shape was empty or did not match the data length.
    #[error("invalid shape: {0}")]
    Shape(&'static str),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Invalid knob values or inconsistent query settings.
    #[error("invalid configuration: {0}")]
    Config(&'static str),

    /// The aggregated query vector vanished, so relevance is undefined.
    #[error("query embedding is degenerate (zero norm)")]
    DegenerateQuery,

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("exhaustive enumeration limited to {max} tokens, got {found}")]
    TooLargeForEnumeration { max: usize, found: usize },
}

impl Error {
    /// Stable identifier for host-language wrappers and logs.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Shape(_) => "Shape",
            Error::NonFinite { .. } => "NonFinite",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::Config(_) => "Config",
            Error::DegenerateQuery => "DegenerateQuery",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::TooLargeForEnumeration { .. } => "TooLargeForEnumeration",
        }
    }
}
