use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] pksns_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("config field `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("checkpoint {path}: format version {found}, expected {expected}")]
    CheckpointVersion { path: PathBuf, found: u32, expected: u32 },
    #[error("csv {path}: {reason}")]
    Csv { path: PathBuf, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
