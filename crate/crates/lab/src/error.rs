use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Bad command-line input or function spec; exit code 2.
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] hwy_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("kernel cache {0}")]
    Cache(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
