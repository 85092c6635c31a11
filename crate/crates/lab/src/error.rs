use std::path::PathBuf;

use marstrand_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const RUNTIME: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const SURJECTIVITY: i32 = 3;
    pub const INFEASIBLE: i32 = 4;
    pub const BUDGET: i32 = 5;
    pub const FALSIFIED: i32 = 6;
    pub const UNSUPPORTED: i32 = 7;
}

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("falsified: {0}")]
    Falsified(String),
}

impl LabError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Field { field: field.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Core(e) => core_exit_code(e),
            LabError::Json { .. } | LabError::Field { .. } => exit::PARSE,
            LabError::Io { .. } | LabError::Csv(_) => exit::RUNTIME,
            LabError::Falsified(_) => exit::FALSIFIED,
        }
    }
}

pub fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Malformed(_)
        | CoreError::MalformedSubset { .. }
        | CoreError::DuplicateIndex(_)
        | CoreError::ShapeMismatch { .. }
        | CoreError::InvalidInterval { .. }
        | CoreError::Precondition(_) => exit::PARSE,
        CoreError::NotSurjective { .. } => exit::SURJECTIVITY,
        CoreError::Infeasible { .. } => exit::INFEASIBLE,
        CoreError::TooManyBlocks { .. } | CoreError::BudgetExceeded { .. } => exit::BUDGET,
        CoreError::Inconsistent(_) => exit::FALSIFIED,
        CoreError::Unsupported(_) => exit::UNSUPPORTED,
        CoreError::DegeneratePair { .. } | CoreError::RankDeficient(_) | CoreError::InsufficientResolution(_) => exit::RUNTIME,
    }
}

pub type LabResult<T> = Result<T, LabError>;
