//! Completion interface shared by retrieval, description and SQL
//! generation. Concrete clients (scripted replay, HTTP) live in the std
//! crate.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::LlmError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub n_samples: usize,
    pub temperature: f64,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, n_samples: usize, temperature: f64) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            n_samples,
            temperature,
        }
    }
}

pub trait LlmClient {
    /// Returns exactly `req.n_samples` completions.
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, LlmError>;
}

impl<T: LlmClient + ?Sized> LlmClient for &T {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        (**self).complete(req)
    }
}

impl<T: LlmClient + ?Sized> LlmClient for alloc::boxed::Box<T> {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        (**self).complete(req)
    }
}

/// Collapses runs of whitespace to one space and trims the ends. Prompt
/// digests are taken over this form.
pub fn normalize_prompt(prompt: &str) -> String {
    let mut out = String::with_capacity(prompt.len());
    for word in prompt.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}
