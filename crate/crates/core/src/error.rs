use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// The CLI maps these onto process exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}dimension mismatch: expected {expected}, found {found}", line_prefix(*.line))]
    DimensionMismatch {
        line: Option<usize>,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("zero-norm vector has no direction")]
    ZeroVector,

    #[error("category {category} out of range for {num_categories} categories")]
    CategoryRange {
        category: usize,
        num_categories: usize,
    },

    #[error("parameter shape mismatch: expected {expected} values, found {found}")]
    ParameterShape { expected: usize, found: usize },

    #[error("numeric divergence: {0}")]
    NumericDivergence(String),

    #[error("source pretraining reached accuracy {accuracy:.4}, below the required {required}")]
    PretrainFailure { accuracy: f64, required: f64 },

    #[error("invalid `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code used by the command-line front end: 1 usage, 2 data, 3 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericDivergence(_) => 3,
            Error::InvalidConfig { .. } | Error::Precondition(_) => 1,
            _ => 2,
        }
    }
}
