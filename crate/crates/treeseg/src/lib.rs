//! IO, configuration, simulation and the command-line surface around the
//! `treeseg-core` inference engine.

pub mod cli;
pub mod config;
pub mod eval;
pub mod io;
pub mod pipeline;
pub mod simulate;

/// Failure classes mapped to distinct process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("ingestion error: {0}")]
    Ingestion(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Ingestion(_) => 3,
            AppError::Config(_) => 2,
            AppError::Numerical(_) => 4,
            AppError::Io(_) => 3,
        }
    }

    /// Classify a core-engine error.
    pub fn from_core(e: treeseg_core::Error) -> Self {
        use treeseg_core::Error as E;
        match &e {
            E::NonFiniteData { .. } | E::ConstantColumn { .. } => AppError::Ingestion(e.to_string()),
            E::InvalidParameter { .. }
            | E::DimensionMismatch { .. }
            | E::InvalidSegment { .. }
            | E::Unsupported { .. }
            | E::EmptyReplicates => AppError::Config(e.to_string()),
            E::NotPositiveDefinite { .. }
            | E::NumericalFailure { .. }
            | E::NoAdmissibleSegmentation { .. } => AppError::Numerical(e.to_string()),
        }
    }
}

impl From<treeseg_core::Error> for AppError {
    fn from(e: treeseg_core::Error) -> Self {
        AppError::from_core(e)
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Io(e.into())
    }
}

pub type AppResult<T> = Result<T, AppError>;
