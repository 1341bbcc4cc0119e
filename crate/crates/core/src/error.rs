use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} {value} out of range [{min}, {max}]")]
    Range {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("shape mismatch: expected {expected} {what}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("degenerate group: {0}")]
    DegenerateGroup(String),

    #[error("unsupported value function: {0}")]
    UnsupportedSpec(String),

    #[error("ranking partition mismatch: expected {expected}, got {got}")]
    PartitionMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("metric domain: {0}")]
    MetricDomain(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from the input data rather than from the caller's configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Ingestion { .. }
                | Error::MissingColumn(_)
                | Error::DegenerateGroup(_)
                | Error::Data(_)
                | Error::Shape { .. }
                | Error::Csv(_)
                | Error::Io { .. }
        )
    }
}
