use std::path::{Path, PathBuf};

use sqlweave_core::{DdlError, LlmError, ModelError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Dbm { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Ddl { path: PathBuf, source: DdlError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("sql: {0}")]
    Sql(String),
    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn json(path: &Path, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn dbm(path: &Path, message: impl Into<String>) -> Self {
        Error::Dbm {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    /// Short tag for one-line error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Dbm { .. } => "dbm",
            Error::Ddl { .. } => "ddl",
            Error::Model(_) => "invalid_model",
            Error::Llm(_) => "llm",
            Error::Sql(_) => "sql",
            Error::Config(_) => "config",
        }
    }
}
