//! Command-line host for the sqlweave pipeline: model files, LLM clients,
//! SQLite execution and benchmark runs.

pub mod cli;
pub mod config;
pub mod dbm;
pub mod error;
pub mod eval;
pub mod exec;
pub mod fixtures;
pub mod llm;
pub mod rundir;

pub use error::Error;
