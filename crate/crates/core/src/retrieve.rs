//! Relevance retrieval: pick relevant core tables, then attributes, and
//! descend breadth-first into star/snowflake trees.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::LlmError;
use crate::llm::{CompletionRequest, LlmClient};
use crate::model::{DatabaseModel, TreePattern};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<String>,
}

impl Question {
    pub fn new(text: impl Into<String>) -> Self {
        Question {
            text: text.into(),
            evidence: None,
        }
    }

    pub fn with_evidence(mut self, evidence: impl Into<String>) -> Self {
        self.evidence = Some(evidence.into());
        self
    }
}

/// Relevant tables, each with its relevant attributes in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelevanceSet {
    entries: BTreeMap<String, Vec<String>>,
}

impl RelevanceSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builder for tests and fixtures.
    pub fn from_entries(entries: &[(&str, &[&str])]) -> Self {
        let mut r = Self::new();
        for (t, attrs) in entries {
            r.insert_table(t);
            for a in *attrs {
                r.insert_attr(t, a);
            }
        }
        r
    }

    pub fn insert_table(&mut self, table: &str) {
        self.entries.entry(table.to_string()).or_default();
    }

    pub fn insert_attr(&mut self, table: &str, attr: &str) {
        let attrs = self.entries.entry(table.to_string()).or_default();
        if !attrs.iter().any(|a| a == attr) {
            attrs.push(attr.to_string());
        }
    }

    pub fn union(&mut self, other: &RelevanceSet) {
        for (t, attrs) in &other.entries {
            self.insert_table(t);
            for a in attrs {
                self.insert_attr(t, a);
            }
        }
    }

    pub fn tables(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains_table(&self, t: &str) -> bool {
        self.entries.contains_key(t)
    }

    pub fn attributes(&self, t: &str) -> &[String] {
        self.entries.get(t).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<String>> {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Drops unknown tables and attributes and puts attributes in
    /// declaration order.
    pub fn canonicalize(&mut self, model: &DatabaseModel) {
        let mut out = BTreeMap::new();
        for (t, attrs) in &self.entries {
            let Some(def) = model.table(t) else { continue };
            let mut kept: Vec<(usize, String)> = attrs
                .iter()
                .filter_map(|a| def.attribute_index(a).map(|i| (i, def.attributes[i].name.clone())))
                .collect();
            kept.sort();
            kept.dedup();
            out.insert(t.clone(), kept.into_iter().map(|(_, a)| a).collect());
        }
        self.entries = out;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleAggregate {
    pub counts: BTreeMap<String, usize>,
    /// Items by count descending, then name ascending, at most `cap` long.
    pub ranked: Vec<String>,
    pub cap: usize,
}

/// Counts each item once per sample it appears in.
pub fn aggregate_samples(samples: &[Vec<String>], cap: usize) -> SampleAggregate {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for s in samples {
        let mut seen: Vec<&str> = Vec::new();
        for item in s {
            if seen.contains(&item.as_str()) {
                continue;
            }
            seen.push(item);
            *counts.entry(item.clone()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&String, &usize)> = counts.iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let ranked = ranked.into_iter().take(cap).map(|(k, _)| k.clone()).collect();
    SampleAggregate { counts, ranked, cap }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrieveError {
    #[error("prompt has neither tables nor attributes")]
    EmptyPrompt,
    #[error("retrieval empty for question {question:?}")]
    Empty { question: String },
    #[error("llm failure while querying `{node}`: {source}")]
    Llm { node: String, source: LlmError },
}

/// Renders a JSON object with keys in the given order, one entry per line.
fn render_json(entries: &[(String, String)]) -> String {
    let mut out = String::from("{\n");
    for (i, (k, v)) in entries.iter().enumerate() {
        out.push_str("     ");
        out.push_str(&json_string(k));
        out.push_str(": ");
        out.push_str(&json_string(v));
        if i + 1 < entries.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push('}');
    out
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).unwrap_or_else(|_| format!("\"{s}\""))
}

/// The element-selection prompt. `tables` maps table names to summaries,
/// `attributes` maps attribute names (plus an optional `DescriptionField`)
/// to descriptions. Attributes are listed bare, tables quoted.
pub fn render_prompt_a(q: &Question, tables: &[(String, String)], attributes: &[(String, String)]) -> Result<String, RetrieveError> {
    if tables.is_empty() && attributes.is_empty() {
        return Err(RetrieveError::EmptyPrompt);
    }
    let mut json_entries: Vec<(String, String)> = attributes.to_vec();
    json_entries.extend(tables.iter().cloned());
    let mut elements: Vec<String> = attributes
        .iter()
        .filter(|(k, _)| k != DESCRIPTION_FIELD)
        .map(|(k, _)| k.clone())
        .collect();
    elements.extend(tables.iter().map(|(k, _)| format!("'{k}'")));
    Ok(format!(
        "Here is a json schema. Please treat json schema objects as a description of tables in a database {}.\n\
         The user has a query to answer {}. What are all relevant json elements to a user query from the list [{}]?\n\
         Output is a list of elements, [element, element,  element,...]. Do not explain.",
        render_json(&json_entries),
        q.text,
        elements.join(", ")
    ))
}

pub const DESCRIPTION_FIELD: &str = "DescriptionField";

/// One-line summary of a table: its description and property names. For
/// a pattern root, properties include dotted paths into the tree.
pub fn table_summary(model: &DatabaseModel, table: &str) -> String {
    let Some(def) = model.table(table) else {
        return String::new();
    };
    let mut props: Vec<String> = def.attributes.iter().map(|a| a.name.clone()).collect();
    if let Some(p) = model.pattern_rooted_at(table) {
        collect_tree_props(model, p, table, "", &mut props);
    }
    let mut out = String::new();
    if !def.description.is_empty() {
        out.push_str(def.description.trim_end());
        out.push(' ');
    }
    out.push_str(&format!("Properties of {}: {}. ", def.name, props.join(", ")));
    out
}

fn collect_tree_props(model: &DatabaseModel, p: &TreePattern, node: &str, prefix: &str, out: &mut Vec<String>) {
    for child in p.children(node) {
        let path = if prefix.is_empty() {
            child.clone()
        } else {
            format!("{prefix}.{child}")
        };
        out.push(path.clone());
        if let Some(def) = model.table(child) {
            out.extend(def.attributes.iter().map(|a| format!("{path}.{}", a.name)));
        }
        collect_tree_props(model, p, child, &path, out);
    }
}

/// Attribute descriptions for one table, led by its description.
pub fn attribute_entries(model: &DatabaseModel, table: &str) -> Vec<(String, String)> {
    let Some(def) = model.table(table) else {
        return Vec::new();
    };
    let mut out = alloc::vec![(DESCRIPTION_FIELD.to_string(), def.description.clone())];
    out.extend(def.attributes.iter().map(|a| (a.name.clone(), a.description.clone())));
    out
}

/// Items of the first bracketed list in `text` (the whole text when there
/// are no brackets), with quotes and backticks stripped.
pub fn parse_list_answer(text: &str) -> Vec<String> {
    let body = match text.find('[') {
        Some(open) => {
            let rest = &text[open + 1..];
            match rest.find(']') {
                Some(close) => &rest[..close],
                None => rest,
            }
        }
        None => text,
    };
    body.split([',', '\n'])
        .map(|s| s.trim().trim_matches(|c| matches!(c, '\'' | '"' | '`')).trim())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Maps answer items onto `known` names case-insensitively. Returns the
/// matches and the items that matched nothing.
pub fn match_known(items: &[String], known: &[&str]) -> (Vec<String>, Vec<String>) {
    let mut hits = Vec::new();
    let mut dropped = Vec::new();
    for item in items {
        let found = known
            .iter()
            .find(|k| **k == item.as_str())
            .or_else(|| known.iter().find(|k| k.eq_ignore_ascii_case(item)));
        match found {
            Some(k) => {
                if !hits.iter().any(|h: &String| h == k) {
                    hits.push(k.to_string());
                }
            }
            None => dropped.push(item.clone()),
        }
    }
    (hits, dropped)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrieveSettings {
    pub samples: usize,
    pub temperature: f64,
    pub cap: usize,
}

impl Default for RetrieveSettings {
    fn default() -> Self {
        RetrieveSettings {
            samples: 5,
            temperature: 0.2,
            cap: 8,
        }
    }
}

/// One element-selection call, for the phase log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrieveEvent {
    /// `core` for the core-table step, otherwise the queried table.
    pub node: String,
    pub selected: Vec<String>,
    pub dropped: Vec<String>,
}

pub struct Retriever<'a, L: LlmClient + ?Sized> {
    pub model: &'a DatabaseModel,
    pub llm: &'a L,
    pub settings: RetrieveSettings,
    pub log: Vec<RetrieveEvent>,
}

impl<'a, L: LlmClient + ?Sized> Retriever<'a, L> {
    pub fn new(model: &'a DatabaseModel, llm: &'a L, settings: RetrieveSettings) -> Self {
        Retriever {
            model,
            llm,
            settings,
            log: Vec::new(),
        }
    }

    /// Issues one prompt, parses every sample against `known` and returns
    /// the ranked selection.
    fn select(&mut self, node: &str, prompt: String, known: &[&str]) -> Result<Vec<String>, RetrieveError> {
        let req = CompletionRequest::new(prompt, self.settings.samples, self.settings.temperature);
        let answers = self.llm.complete(&req).map_err(|source| RetrieveError::Llm {
            node: node.to_string(),
            source,
        })?;
        let mut samples = Vec::with_capacity(answers.len());
        let mut dropped = Vec::new();
        for a in &answers {
            let (hits, miss) = match_known(&parse_list_answer(a), known);
            for m in miss {
                if !dropped.contains(&m) {
                    dropped.push(m);
                }
            }
            samples.push(hits);
        }
        let ranked = aggregate_samples(&samples, self.settings.cap).ranked;
        self.log.push(RetrieveEvent {
            node: node.to_string(),
            selected: ranked.clone(),
            dropped,
        });
        Ok(ranked)
    }

    fn select_attributes(&mut self, q: &Question, table: &str) -> Result<Vec<String>, RetrieveError> {
        let entries = attribute_entries(self.model, table);
        let def = self.model.table(table).expect("known table");
        let known: Vec<&str> = def.attribute_names().collect();
        if known.is_empty() {
            return Ok(Vec::new());
        }
        let prompt = render_prompt_a(q, &[], &entries)?;
        self.select(table, prompt, &known)
    }

    /// Breadth-first descent into the pattern tree rooted at `root`.
    pub fn dive(&mut self, q: &Question, root: &str) -> Result<RelevanceSet, RetrieveError> {
        let model = self.model;
        let pattern = model.pattern_rooted_at(root);
        let mut relta = RelevanceSet::new();
        let mut queue = VecDeque::from([root.to_string()]);
        while let Some(r) = queue.pop_front() {
            let children: &[String] = pattern.map(|p| p.children(&r)).unwrap_or(&[]);
            if children.is_empty() {
                let attrs = self.select_attributes(q, &r)?;
                relta.insert_table(&r);
                for a in &attrs {
                    relta.insert_attr(&r, a);
                }
                continue;
            }
            let attr_entries = attribute_entries(model, &r);
            let child_entries: Vec<(String, String)> = children
                .iter()
                .filter(|c| model.has_table(c))
                .map(|c| (c.clone(), table_summary(model, c)))
                .collect();
            let def = model.table(&r).expect("pattern node is a table");
            let mut known: Vec<&str> = def.attribute_names().collect();
            known.extend(child_entries.iter().map(|(c, _)| c.as_str()));
            let prompt = render_prompt_a(q, &child_entries, &attr_entries)?;
            let selected = self.select(&r, prompt, &known)?;
            let attrs: Vec<&String> = selected.iter().filter(|s| def.has_attribute(s)).collect();
            if r == root || !attrs.is_empty() {
                relta.insert_table(&r);
            }
            for a in attrs {
                relta.insert_attr(&r, a);
            }
            // Children go on the queue in declaration order.
            for c in children {
                if selected.iter().any(|s| s == c) {
                    queue.push_back(c.clone());
                }
            }
        }
        relta.canonicalize(model);
        Ok(relta)
    }

    pub fn retrieve(&mut self, q: &Question) -> Result<RelevanceSet, RetrieveError> {
        let model = self.model;
        let core = model.core_tables();
        let summaries: Vec<(String, String)> = core.iter().map(|t| (t.to_string(), table_summary(model, t))).collect();
        let prompt = render_prompt_a(q, &summaries, &[])?;
        let selected = self.select("core", prompt, &core)?;
        let mut relta = RelevanceSet::new();
        for t in &selected {
            if model.pattern_rooted_at(t).is_some() {
                let sub = self.dive(q, t)?;
                relta.union(&sub);
            } else {
                let attrs = self.select_attributes(q, t)?;
                relta.insert_table(t);
                for a in &attrs {
                    relta.insert_attr(t, a);
                }
            }
        }
        relta.canonicalize(model);
        if relta.is_empty() {
            return Err(RetrieveError::Empty {
                question: q.text.clone(),
            });
        }
        Ok(relta)
    }
}

pub fn dive<L: LlmClient + ?Sized>(q: &Question, root: &str, llm: &L, model: &DatabaseModel) -> Result<RelevanceSet, RetrieveError> {
    Retriever::new(model, llm, RetrieveSettings::default()).dive(q, root)
}

pub fn retrieve_relevant<L: LlmClient + ?Sized>(q: &Question, model: &DatabaseModel, llm: &L) -> Result<RelevanceSet, RetrieveError> {
    Retriever::new(model, llm, RetrieveSettings::default()).retrieve(q)
}
