//! Schema-aware text-to-SQL planning: database models, schema graphs,
//! constrained join-walk search and summary view construction.
//!
//! The crate is `no_std` (with `alloc`); file formats, HTTP and the command
//! line live in the `sqlweave` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ddl;
pub mod describe;
pub mod error;
pub mod graph;
pub mod llm;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod retrieve;
pub mod solver;
pub mod tosql;
pub mod view;

pub use error::{DdlError, LlmError, ModelError};
pub use graph::SchemaGraph;
pub use llm::{CompletionRequest, LlmClient};
pub use model::DatabaseModel;
pub use retrieve::{Question, RelevanceSet};
pub use solver::{PathProblem, Walk};
