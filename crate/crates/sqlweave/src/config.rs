//! Optional TOML run configuration. Command-line flags override it.
//!
//! ```toml
//! model = "schema.sql"
//! dbm = "dbm/"
//! samples = 20
//! retrieve_samples = 5
//! temperature = 0.2
//!
//! [llm]
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! model = "gpt-4-turbo"
//! api_key_env = "SQLWEAVE_API_KEY"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::Error;

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub max_retries: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// DDL file.
    pub model: Option<PathBuf>,
    pub dbm: Option<PathBuf>,
    pub mock: Option<PathBuf>,
    pub seed: Option<PathBuf>,
    pub samples: Option<usize>,
    pub retrieve_samples: Option<usize>,
    pub temperature: Option<f64>,
    pub max_len: Option<usize>,
    pub run_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub dialect: Option<String>,
    #[serde(default)]
    pub llm: LlmConfig,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<FileConfig, Error> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Relative paths in the file are taken relative to the file.
    pub fn load(path: &Path) -> Result<FileConfig, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.model, &mut c.dbm, &mut c.mock, &mut c.seed, &mut c.run_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let c = FileConfig::parse("samples = 7\n[llm]\nmodel = \"m\"\n").unwrap();
        assert_eq!(c.samples, Some(7));
        assert_eq!(c.llm.model.as_deref(), Some("m"));
        assert!(FileConfig::parse("smaples = 7").is_err());
    }
}
