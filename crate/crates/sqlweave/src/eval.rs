//! Benchmark runner: per question, sample final queries, execute them and
//! compare with the ground truth.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sqlweave_core::metrics::{coverage, execution_match, ResultSet, Value, footprint_through_view, sql_footprint_with_model, subset_match};
use sqlweave_core::model::DatabaseModel;
use sqlweave_core::pipeline::{answer_question, PipelineSettings};
use sqlweave_core::{LlmClient, Question};

use crate::error::Error;
use crate::exec::Executor;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<String>,
    pub gt_sql: String,
}

impl DatasetItem {
    pub fn to_question(&self) -> Question {
        Question {
            text: self.question.clone(),
            evidence: self.evidence.clone(),
        }
    }
}

/// Parses JSON lines, skipping blank lines. Errors carry the 1-based line.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetItem>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetItem>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text).map_err(|(line, source)| Error::Json {
        path: std::path::PathBuf::from(format!("{}:{line}", path.display())),
        source,
    })
}

/// Reads a result set from CSV with a header row. Empty cells and `NULL`
/// are NULL; numbers parse as numbers.
pub fn parse_result_csv(text: &str) -> Result<ResultSet, csv::Error> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let columns = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(Value::parse_cell).collect());
    }
    Ok(ResultSet::new(columns, rows))
}

pub fn load_result_csv(path: &Path) -> Result<ResultSet, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_result_csv(&text).map_err(|e| Error::Sql(format!("{}: {e}", path.display())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    /// Final-query samples drawn per question.
    pub samples: usize,
    /// A question is solved when strictly more samples than this match.
    pub threshold: usize,
    pub jobs: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            samples: 20,
            threshold: 5,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub index: usize,
    pub question: String,
    pub cover_t: Option<f64>,
    pub cover_a: Option<f64>,
    /// Samples whose result execution-matches the ground truth.
    pub ex_votes: usize,
    /// Samples whose result contains the ground truth.
    pub esx_votes: usize,
    pub samples: usize,
    pub ex: bool,
    pub esx: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub view_sql: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_sql: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub questions: usize,
    pub ex_solved: usize,
    pub ex_unsolved: usize,
    pub esx_solved: usize,
    pub errored: usize,
    /// Means over records that have a coverage value; 0 when none do.
    pub cover_t: f64,
    pub cover_a: f64,
}

impl Aggregates {
    pub fn from_records(records: &[QuestionRecord]) -> Aggregates {
        let mean = |vals: Vec<f64>| {
            if vals.is_empty() {
                0.0
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        };
        let errored = records.iter().filter(|r| r.error.is_some()).count();
        let ex_solved = records.iter().filter(|r| r.ex).count();
        Aggregates {
            questions: records.len(),
            ex_solved,
            ex_unsolved: records.len() - errored - ex_solved,
            esx_solved: records.iter().filter(|r| r.esx).count(),
            errored,
            cover_t: mean(records.iter().filter_map(|r| r.cover_t).collect()),
            cover_a: mean(records.iter().filter_map(|r| r.cover_a).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub protocol: Protocol,
    pub records: Vec<QuestionRecord>,
    pub aggregates: Aggregates,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Metric rows `cover_t`, `cover_a`, `EX`, `ESX` followed by one line
    /// per question.
    pub fn to_text(&self) -> String {
        let a = &self.aggregates;
        let n = a.questions;
        let rows = [
            ("cover_t", format!("{:.2}", a.cover_t)),
            ("cover_a", format!("{:.2}", a.cover_a)),
            ("EX", format!("{}/{}", a.ex_solved, n)),
            ("ESX", format!("{}/{}", a.esx_solved, n)),
        ];
        let mut out = String::new();
        let _ = writeln!(out, "{:<8} {:>8}", "metric", "value");
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<8} {v:>8}");
        }
        if a.errored > 0 {
            let _ = writeln!(out, "{:<8} {:>8}", "errors", a.errored);
        }
        if !self.records.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "{:>3} {:>7} {:>7} {:>5} {:>5}  status", "#", "cover_t", "cover_a", "EX", "ESX");
            for r in &self.records {
                let cov = |c: Option<f64>| c.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
                let status = match &r.error {
                    Some(e) => format!("error: {e}"),
                    None if r.ex => "solved".into(),
                    None => "unsolved".into(),
                };
                let _ = writeln!(
                    out,
                    "{:>3} {:>7} {:>7} {:>5} {:>5}  {}",
                    r.index + 1,
                    cov(r.cover_t),
                    cov(r.cover_a),
                    format!("{}/{}", r.ex_votes, r.samples),
                    format!("{}/{}", r.esx_votes, r.samples),
                    status
                );
            }
        }
        out
    }
}

fn blank_record(index: usize, item: &DatasetItem, samples: usize) -> QuestionRecord {
    QuestionRecord {
        index,
        question: item.question.clone(),
        cover_t: None,
        cover_a: None,
        ex_votes: 0,
        esx_votes: 0,
        samples,
        ex: false,
        esx: false,
        view_sql: None,
        final_sql: None,
        error: None,
    }
}

/// Evaluates one question on a fresh session.
pub fn evaluate_question<L: LlmClient + ?Sized>(
    index: usize,
    item: &DatasetItem,
    model: &DatabaseModel,
    llm: &L,
    executor: &dyn Executor,
    settings: &PipelineSettings,
    protocol: Protocol,
) -> QuestionRecord {
    let mut rec = blank_record(index, item, protocol.samples);
    let mut settings = settings.clone();
    settings.tosql.samples = protocol.samples;

    let result = match answer_question(&item.to_question(), model, llm, &settings) {
        Ok(r) => r,
        Err(e) => {
            rec.view_sql = e.partial.view.as_ref().map(|v| v.sql_text.clone());
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.view_sql = Some(result.view.sql_text.clone());
    rec.final_sql = Some(result.query.sql_text.clone());

    let gt_fp = sql_footprint_with_model(&item.gt_sql, model);
    let our_fp = footprint_through_view(&result.query.sql_text, &result.view.view_name, &result.view_plan);
    if let (Ok(g), Ok(f)) = (&gt_fp, &our_fp) {
        if let Ok((t, a)) = coverage(f, g) {
            rec.cover_t = Some(t);
            rec.cover_a = Some(a);
        }
    }

    let mut session = match executor.session() {
        Ok(s) => s,
        Err(e) => {
            rec.error = Some(format!("phase=execute kind=session message={:?}", e.to_string()));
            return rec;
        }
    };
    let gt = match session.query(&item.gt_sql) {
        Ok(g) => g,
        Err(e) => {
            rec.error = Some(format!("phase=execute kind=ground_truth message={:?}", e.to_string()));
            return rec;
        }
    };
    if let Err(e) = session.execute_batch(&result.view.sql_text) {
        rec.error = Some(format!("phase=execute kind=view message={:?}", e.to_string()));
        return rec;
    }
    for sql in result.samples.iter().flatten() {
        // Failing samples simply do not match.
        if let Ok(f) = session.query(sql) {
            if execution_match(&f, &gt) {
                rec.ex_votes += 1;
            }
            if subset_match(&f, &gt) {
                rec.esx_votes += 1;
            }
        }
    }
    rec.ex = rec.ex_votes > protocol.threshold;
    rec.esx = rec.esx_votes > protocol.threshold;
    rec
}

/// Runs every question. With `jobs > 1` questions run on worker threads;
/// records are merged back in dataset order.
pub fn run_benchmark<L: LlmClient + Sync + ?Sized>(
    dataset: &[DatasetItem],
    model: &DatabaseModel,
    llm: &L,
    executor: &dyn Executor,
    settings: &PipelineSettings,
    protocol: Protocol,
) -> BenchmarkReport {
    let jobs = protocol.jobs.max(1).min(dataset.len().max(1));
    let records = if jobs == 1 {
        dataset
            .iter()
            .enumerate()
            .map(|(i, item)| evaluate_question(i, item, model, llm, executor, settings, protocol))
            .collect()
    } else {
        let next = AtomicUsize::new(0);
        let out: Mutex<Vec<Option<QuestionRecord>>> = Mutex::new(vec![None; dataset.len()]);
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= dataset.len() {
                        break;
                    }
                    let r = evaluate_question(i, &dataset[i], model, llm, executor, settings, protocol);
                    out.lock().expect("records lock")[i] = Some(r);
                });
            }
        });
        out.into_inner()
            .expect("records lock")
            .into_iter()
            .map(|r| r.expect("every question evaluated"))
            .collect::<Vec<_>>()
    };
    let aggregates = Aggregates::from_records(&records);
    BenchmarkReport {
        protocol,
        records,
        aggregates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_lines() {
        let d = parse_dataset("{\"question\": \"q\", \"gt_sql\": \"select 1\"}\n\n{\"question\": \"r\", \"evidence\": \"e\", \"gt_sql\": \"select 2\"}\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[1].evidence.as_deref(), Some("e"));
        assert_eq!(parse_dataset("{}\n").unwrap_err().0, 1);
    }

    #[test]
    fn empty_report() {
        let a = Aggregates::from_records(&[]);
        assert_eq!(a, Aggregates::default());
        let r = BenchmarkReport {
            protocol: Protocol::default(),
            records: vec![],
            aggregates: a,
        };
        let text = r.to_text();
        for label in ["cover_t", "cover_a", "EX", "ESX"] {
            assert!(text.lines().any(|l| l.starts_with(label)), "{label}");
        }
    }
}
