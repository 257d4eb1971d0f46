//! Final query generation over the summary view.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sqlparser::dialect::GenericDialect;
use sqlparser::keywords::Keyword;
use sqlparser::tokenizer::{Token, Tokenizer};
use thiserror::Error;

use crate::error::LlmError;
use crate::llm::{CompletionRequest, LlmClient};
use crate::retrieve::Question;
use crate::view::ViewSql;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ToSqlError {
    #[error("no SQL found in model output: {raw:?}")]
    NoSql { raw: String },
    #[error("none of {samples} samples contained SQL")]
    AllSamplesFailed { samples: usize, first_raw: String },
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalQuery {
    pub sql_text: String,
    pub vote_count: usize,
    pub sample_total: usize,
}

/// Final-query prompt. The schema line and the evidence line appear only
/// when given.
pub fn render_prompt_c(q: &Question, view: &ViewSql, evidence: Option<&str>, schema_excerpt: Option<&str>) -> String {
    let name = &view.view_name;
    let mut lines: Vec<String> = Vec::new();
    if let Some(schema) = schema_excerpt {
        lines.push(format!("Here is a SQL schema for in MySQL: {schema}"));
    }
    lines.push(format!("I created a view table {name} with all relevant information."));
    lines.push(format!("Here is a view {}.", view.sql_text));
    lines.push(format!(
        "Please write MySQL query to {name} view to answer the following question: {}.",
        q.text
    ));
    if let Some(ev) = evidence {
        lines.push(format!("Additional knowledge to answer:  {ev}"));
    }
    lines.push(format!("Use only {name} columns in the query."));
    lines.push("Absolutely NO columns renaming.".to_string());
    lines.push("Absolutely NO HAVING operators.".to_string());
    lines.push("Absolutely NO COUNT(*).".to_string());
    lines.push("Output query that I can run via python interface. Output '```sql...'. Do not explain.".to_string());
    lines.join("\n")
}

fn find_ci(hay: &str, needle: &str) -> Option<usize> {
    let h = hay.as_bytes();
    let n = needle.as_bytes();
    if n.len() > h.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn starts_with_select(s: &str) -> bool {
    let w: String = s.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    w.eq_ignore_ascii_case("select") || w.eq_ignore_ascii_case("with")
}

/// Contents of the first ```sql fence; failing that, the whole text when
/// it starts with `SELECT` (or `WITH`).
pub fn extract_sql(raw: &str) -> Result<String, ToSqlError> {
    if let Some(start) = find_ci(raw, "```sql") {
        let body = &raw[start + "```sql".len()..];
        let end = body.find("```").unwrap_or(body.len());
        let sql = body[..end].trim();
        if !sql.is_empty() {
            return Ok(sql.to_string());
        }
    }
    let t = raw.trim();
    if starts_with_select(t) {
        return Ok(t.to_string());
    }
    Err(ToSqlError::NoSql { raw: raw.to_string() })
}

/// Whether the word at `i` names a function, i.e. is followed by `(`.
fn is_call(tokens: &[Token], i: usize) -> bool {
    tokens[i + 1..]
        .iter()
        .find(|t| !matches!(t, Token::Whitespace(_)))
        .map(|t| matches!(t, Token::LParen))
        .unwrap_or(false)
}

/// Whitespace collapsed, keywords and function names lowercased, trailing semicolons dropped.
/// Identifiers and literals keep their spelling.
pub fn normalize_sql(sql: &str) -> String {
    let dialect = GenericDialect {};
    let tokens = match Tokenizer::new(&dialect, sql).tokenize() {
        Ok(t) => t,
        Err(_) => return sql.split_whitespace().collect::<Vec<_>>().join(" ").trim_end_matches(';').trim().to_string(),
    };
    let mut out = String::with_capacity(sql.len());
    let mut pending_space = false;
    for (i, tok) in tokens.iter().enumerate() {
        match tok {
            Token::Whitespace(_) => pending_space = true,
            Token::EOF => {}
            other => {
                if pending_space && !out.is_empty() {
                    out.push(' ');
                }
                pending_space = false;
                match other {
                    Token::Word(w) if w.quote_style.is_none() && (w.keyword != Keyword::NoKeyword || is_call(&tokens, i)) => {
                        out.push_str(&w.value.to_lowercase())
                    }
                    _ => out.push_str(&other.to_string()),
                }
            }
        }
    }
    loop {
        let t = out.trim_end();
        if let Some(stripped) = t.strip_suffix(';') {
            out = stripped.to_string();
        } else {
            out.truncate(t.len());
            break;
        }
    }
    out
}

/// Most frequent normalized query; ties go to the lexicographically
/// smallest. Returns the query and its frequency.
pub fn majority<'a>(candidates: impl IntoIterator<Item = &'a str>) -> Option<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for c in candidates {
        *counts.entry(normalize_sql(c)).or_default() += 1;
    }
    // BTreeMap iterates in ascending key order, so the first maximum wins.
    let mut best: Option<(String, usize)> = None;
    for (k, n) in counts {
        if best.as_ref().map(|(_, b)| n > *b).unwrap_or(true) {
            best = Some((k, n));
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToSqlSettings {
    pub samples: usize,
    pub temperature: f64,
}

impl Default for ToSqlSettings {
    fn default() -> Self {
        ToSqlSettings {
            samples: 20,
            temperature: 0.2,
        }
    }
}

/// Raw completions and their extracted SQL, one entry per sample.
pub fn sample_queries<L: LlmClient + ?Sized>(
    q: &Question,
    view: &ViewSql,
    llm: &L,
    settings: ToSqlSettings,
    schema_excerpt: Option<&str>,
) -> Result<Vec<(String, Result<String, ToSqlError>)>, ToSqlError> {
    if settings.samples == 0 {
        return Err(ToSqlError::NoSamples);
    }
    let prompt = render_prompt_c(q, view, q.evidence.as_deref(), schema_excerpt);
    let answers = llm.complete(&CompletionRequest::new(prompt, settings.samples, settings.temperature))?;
    Ok(answers
        .into_iter()
        .map(|raw| {
            let sql = extract_sql(&raw);
            (raw, sql)
        })
        .collect())
}

pub fn select_query(samples: &[(String, Result<String, ToSqlError>)]) -> Result<FinalQuery, ToSqlError> {
    let ok: Vec<&str> = samples.iter().filter_map(|(_, s)| s.as_deref().ok()).collect();
    match majority(ok) {
        Some((sql_text, vote_count)) => Ok(FinalQuery {
            sql_text,
            vote_count,
            sample_total: samples.len(),
        }),
        None => Err(ToSqlError::AllSamplesFailed {
            samples: samples.len(),
            first_raw: samples.first().map(|(r, _)| r.clone()).unwrap_or_default(),
        }),
    }
}

pub fn generate_query<L: LlmClient + ?Sized>(q: &Question, view: &ViewSql, llm: &L, samples: usize) -> Result<FinalQuery, ToSqlError> {
    let settings = ToSqlSettings {
        samples,
        ..ToSqlSettings::default()
    };
    select_query(&sample_queries(q, view, llm, settings, None)?)
}
