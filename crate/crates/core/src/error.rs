use alloc::string::String;
use core::fmt;

/// Failure conditions surfaced by the inference engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A data entry was NaN or infinite.
    NonFiniteData { row: usize, col: usize },
    /// Segment boundaries violate `1 <= s < t <= N+1`.
    InvalidSegment { s: usize, t: usize, n: usize },
    /// A column is constant, so the sample covariance is singular.
    ConstantColumn { col: usize },
    /// A matrix that must be symmetric positive-definite is not.
    NotPositiveDefinite { context: String },
    /// Dimensions of two inputs do not agree.
    DimensionMismatch { context: String },
    /// A parameter is outside its admissible range.
    InvalidParameter { context: String },
    /// A linear-algebra step failed or the result is numerically unreliable.
    NumericalFailure { context: String, condition: f64 },
    /// No segmentation with the requested number of segments is admissible.
    NoAdmissibleSegmentation { k: usize },
    /// An operation is not defined for the selected backend.
    Unsupported { context: String },
    /// A replicate list was empty.
    EmptyReplicates,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFiniteData { row, col } => {
                write!(f, "non-finite data entry at row {row}, column {col}")
            }
            Error::InvalidSegment { s, t, n } => {
                write!(f, "invalid segment [{s}, {t}) for a series of length {n}")
            }
            Error::ConstantColumn { col } => {
                write!(f, "column {col} is constant; sample covariance is singular")
            }
            Error::NotPositiveDefinite { context } => {
                write!(f, "matrix not positive-definite: {context}")
            }
            Error::DimensionMismatch { context } => write!(f, "dimension mismatch: {context}"),
            Error::InvalidParameter { context } => write!(f, "invalid parameter: {context}"),
            Error::NumericalFailure { context, condition } => {
                write!(f, "numerical failure: {context} (condition estimate {condition:.3e})")
            }
            Error::NoAdmissibleSegmentation { k } => {
                write!(f, "no admissible segmentation with {k} segments")
            }
            Error::Unsupported { context } => write!(f, "unsupported operation: {context}"),
            Error::EmptyReplicates => write!(f, "replicate list is empty"),
        }
    }
}
