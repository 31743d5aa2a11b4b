use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),

    #[error("column `{0}` is mapped but missing from the CSV header")]
    MissingColumn(String),

    #[error("{} malformed rows (cap {cap}); first at line {}: {}", .errors.len(), .errors[0].line_index, .errors[0].message)]
    TooManyRowErrors { errors: Vec<RowError>, cap: usize },

    #[error("k-means: {0}")]
    KMeans(String),

    #[error("merge significance alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("no traces of length {0}")]
    NoTraces(usize),

    #[error("attack: {0}")]
    Attack(String),

    #[error("ROC needs at least one benign and one malicious item")]
    SingleClass,

    #[error("model bundle version {found} is not supported (expected {expected})")]
    BundleVersion { found: u32, expected: u32 },

    #[error("internal: {0}")]
    Internal(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

/// A data row that could not be turned into a flow.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RowError {
    pub line_index: usize,
    pub message: String,
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
