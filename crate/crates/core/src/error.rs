use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::model::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("`{0}` is not the root of a star or snowflake pattern")]
    NotPatternRoot(String),
    #[error("invalid model: {} diagnostic(s), first: {}", .0.len(), .0.first().map(|d| alloc::format!("{d}")).unwrap_or_default())]
    Invalid(Vec<Diagnostic>),
}

/// Errors raised while reading `CREATE TABLE` statements.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DdlError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate table `{0}`")]
    DuplicateTable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("script exhausted (prompt digest {digest})")]
    ScriptExhausted { digest: String },
    #[error("transcript drift at entry {index}: expected digest {expected}, got {actual}")]
    Drift {
        index: usize,
        expected: String,
        actual: String,
    },
    #[error("expected {expected} responses, script holds {actual} (prompt digest {digest})")]
    SampleCount {
        expected: usize,
        actual: usize,
        digest: String,
    },
    #[error("transport failure (prompt digest {digest}): {message}")]
    Transport { digest: String, message: String },
    #[error("authentication failure (prompt digest {digest}): {message}")]
    Auth { digest: String, message: String },
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
}
