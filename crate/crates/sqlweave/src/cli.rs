//! Command-line interface.
//!
//! Without `--model` or `--dbm` every command runs on the bundled CDD
//! example database.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sqlweave_core::graph::build_graph;
use sqlweave_core::model::DatabaseModel;
use sqlweave_core::pipeline::{answer_question, PipelineSettings};
use sqlweave_core::retrieve::RetrieveSettings;
use sqlweave_core::solver::{check_walk, decompose_solve_with_stats};
use sqlweave_core::tosql::ToSqlSettings;
use sqlweave_core::view::{emit_view_sql, plan_view_with, Dialect, DEFAULT_VIEW_NAME};
use sqlweave_core::{LlmClient, Question, RelevanceSet};

use crate::config::FileConfig;
use crate::dbm::load_model;
use crate::error::Error;
use crate::eval::{load_dataset, run_benchmark, Protocol};
use crate::exec::SqliteExecutor;
use crate::fixtures::{self, load_cdd};
use crate::llm::{HttpLlm, HttpSettings, ScriptedLlm};
use crate::rundir;

#[derive(Parser, Debug)]
#[command(name = "sqlweave", version, about = "Constraint-guided text-to-SQL over a summary view")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// DDL file (CREATE TABLE statements).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Directory of DBM JSON documents.
    #[arg(long, global = true)]
    pub dbm: Option<PathBuf>,
    /// Replay LLM answers from a transcript instead of calling an endpoint.
    #[arg(long, global = true)]
    pub mock: Option<PathBuf>,
    /// Final-query samples per question [default: 20].
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Samples per retrieval prompt [default: 5].
    #[arg(long, global = true)]
    pub retrieve_samples: Option<usize>,
    /// Sampling temperature [default: 0.2].
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Fixed walk-length bound instead of iterative deepening.
    #[arg(long, global = true)]
    pub max_len: Option<usize>,
    /// Directory receiving phase artifacts.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    /// Questions evaluated in parallel by `eval` [default: 1].
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// SQL dialect of the emitted view: generic or mysql [default: generic].
    #[arg(long, global = true)]
    pub dialect: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build or check the database model.
    Dbm {
        #[command(subcommand)]
        action: DbmAction,
    },
    /// Find the join walk covering the given tables.
    Solve {
        /// Comma-separated table names.
        #[arg(long, value_delimiter = ',', required = true)]
        tables: Vec<String>,
    },
    /// Answer a question: print the summary view and the final query.
    Ask {
        question: String,
        #[arg(long)]
        evidence: Option<String>,
    },
    /// Emit the summary view for a hand-picked selection.
    View {
        /// Comma-separated `table` or `table.attribute` items.
        #[arg(long, value_delimiter = ',', required = true)]
        select: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_VIEW_NAME)]
        name: String,
    },
    /// Run a benchmark dataset and report coverage, EX and ESX.
    Eval {
        /// JSON lines of {question, evidence?, gt_sql}.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// SQL script populating the database.
        #[arg(long)]
        seed: Option<PathBuf>,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Solved means strictly more matching samples than this.
        #[arg(long, default_value_t = 5)]
        threshold: usize,
    },
    /// Print the artifacts of a run directory.
    Explain {
        /// Print the schema graph in Graphviz format instead.
        #[arg(long)]
        graph: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum DbmAction {
    /// Print the merged model as JSON.
    Build {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the model and list diagnostics.
    Validate,
}

/// A failure reported as one line: `error: phase=.. kind=.. message=..`.
#[derive(Debug)]
pub struct CliError {
    pub phase: String,
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn new(phase: &str, kind: &str, message: impl Into<String>) -> Self {
        CliError {
            phase: phase.into(),
            kind: kind.into(),
            message: message.into(),
        }
    }

    fn setup(e: Error) -> Self {
        CliError::new("setup", e.kind(), e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "phase={} kind={} message={:?}", self.phase, self.kind, self.message)
    }
}

struct Resolved {
    file: FileConfig,
    model: DatabaseModel,
    bundled: bool,
}

impl Resolved {
    fn load(c: &Common) -> Result<Resolved, CliError> {
        let file = match &c.config {
            Some(p) => FileConfig::load(p).map_err(CliError::setup)?,
            None => FileConfig::default(),
        };
        let ddl = c.model.clone().or_else(|| file.model.clone());
        let dbm = c.dbm.clone().or_else(|| file.dbm.clone());
        let (model, bundled) = if ddl.is_none() && dbm.is_none() {
            (fixtures::cdd_model().map_err(CliError::setup)?, true)
        } else {
            (load_model(ddl.as_deref(), dbm.as_deref()).map_err(CliError::setup)?, false)
        };
        Ok(Resolved { file, model, bundled })
    }

    fn settings(&self, c: &Common) -> Result<PipelineSettings, CliError> {
        let temperature = c.temperature.or(self.file.temperature).unwrap_or(0.2);
        let dialect = match c.dialect.as_deref().or(self.file.dialect.as_deref()) {
            None => Dialect::Generic,
            Some(d) => Dialect::parse(d).ok_or_else(|| CliError::new("setup", "usage", format!("unknown dialect `{d}`")))?,
        };
        Ok(PipelineSettings {
            retrieve: RetrieveSettings {
                samples: c.retrieve_samples.or(self.file.retrieve_samples).unwrap_or(5),
                temperature,
                ..RetrieveSettings::default()
            },
            tosql: ToSqlSettings {
                samples: c.samples.or(self.file.samples).unwrap_or(20),
                temperature,
            },
            max_len: c.max_len.or(self.file.max_len),
            dialect,
            alias_len: dialect.identifier_limit(),
            ..PipelineSettings::default()
        })
    }

    fn llm(&self, c: &Common) -> Result<Box<dyn LlmClient + Sync>, CliError> {
        if let Some(path) = c.mock.clone().or_else(|| self.file.mock.clone()) {
            return Ok(Box::new(ScriptedLlm::from_file(&path).map_err(CliError::setup)?));
        }
        let d = HttpSettings::default();
        let l = &self.file.llm;
        let settings = HttpSettings {
            endpoint: l.endpoint.clone().unwrap_or(d.endpoint),
            model: l.model.clone().unwrap_or(d.model),
            api_key_env: l.api_key_env.clone().unwrap_or(d.api_key_env),
            max_retries: l.max_retries.unwrap_or(d.max_retries),
            backoff_ms: d.backoff_ms,
        };
        let client = HttpLlm::from_env(settings).map_err(|e| CliError::new("setup", "llm", e.to_string()))?;
        Ok(Box::new(client))
    }

    fn run_dir(&self, c: &Common) -> Option<PathBuf> {
        c.run_dir.clone().or_else(|| self.file.run_dir.clone())
    }
}

fn selection(model: &DatabaseModel, items: &[String]) -> Result<RelevanceSet, CliError> {
    let mut r = RelevanceSet::new();
    for item in items.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let (t, a) = match item.split_once('.') {
            Some((t, a)) => (t, Some(a)),
            None => (item, None),
        };
        let table = model
            .resolve_table(t)
            .ok_or_else(|| CliError::new("solve", "unknown_target", format!("unknown table `{t}`")))?;
        match a {
            Some(a) => r.insert_attr(table, a),
            None => r.insert_table(table),
        }
    }
    r.canonicalize(model);
    Ok(r)
}

fn write_out(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::setup(Error::io(p, e))),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::new("output", "io", e.to_string())),
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let c = &cli.common;
    let res = Resolved::load(c)?;
    let model = &res.model;
    match &cli.command {
        Command::Dbm { action } => match action {
            DbmAction::Build { out: path } => {
                let json = serde_json::to_string_pretty(model).expect("model serializes") + "\n";
                write_out(out, path.as_deref(), &json)
            }
            DbmAction::Validate => {
                let diags = model.validate();
                let mut text: String = diags.iter().map(|d| format!("{d}\n")).collect();
                text.push_str(&format!("{} diagnostics\n", diags.len()));
                write_out(out, None, &text)?;
                if diags.is_empty() {
                    Ok(())
                } else {
                    Err(CliError::new("model", "invalid_model", format!("{} diagnostics", diags.len())))
                }
            }
        },
        Command::Solve { tables } => {
            let relta = selection(model, tables)?;
            let settings = res.settings(c)?;
            let (plan, stats) = decompose_solve_with_stats(&relta, model, settings.max_len)
                .map_err(|e| CliError::new("solve", solve_kind(&e), e.to_string()))?;
            let mut text = rundir::render_plan(&plan);
            match check_walk(&plan.core_walk, &plan.problem) {
                Ok(()) => text.push_str("check: 0 violations\n"),
                Err(v) => {
                    text.push_str(&format!("check: {} violations\n", v.len()));
                    for x in v {
                        text.push_str(&format!("  {x}\n"));
                    }
                }
            }
            text.push_str(&format!(
                "stats: nodes={} depth={} horizon={}\n",
                stats.nodes_expanded, stats.max_depth, stats.horizon
            ));
            write_out(out, None, &text)
        }
        Command::Ask { question, evidence } => {
            let settings = res.settings(c)?;
            let llm = res.llm(c)?;
            let q = Question {
                text: question.clone(),
                evidence: evidence.clone(),
            };
            let dir = res.run_dir(c);
            match answer_question(&q, model, &llm, &settings) {
                Ok(r) => {
                    if let Some(d) = &dir {
                        rundir::save_result(d, &r).map_err(CliError::setup)?;
                    }
                    write_out(out, None, &format!("{}\n\n{}\n", r.view.sql_text, r.query.sql_text))
                }
                Err(e) => {
                    if let Some(d) = &dir {
                        rundir::save_error(d, &e).map_err(CliError::setup)?;
                    }
                    Err(CliError::new(e.phase.as_str(), e.kind, e.message))
                }
            }
        }
        Command::View { select, out: path, name } => {
            let settings = res.settings(c)?;
            let relta = selection(model, select)?;
            let (plan, _) = decompose_solve_with_stats(&relta, model, settings.max_len)
                .map_err(|e| CliError::new("solve", solve_kind(&e), e.to_string()))?;
            let vp = plan_view_with(&plan, &relta, model, settings.alias_len)
                .map_err(|e| CliError::new("view", "plan", e.to_string()))?;
            let v = emit_view_sql(&vp, name, settings.dialect).map_err(|e| CliError::new("view", "emit", e.to_string()))?;
            write_out(out, path.as_deref(), &format!("{}\n", v.sql_text))
        }
        Command::Eval {
            dataset,
            seed,
            report,
            threshold,
        } => {
            let settings = res.settings(c)?;
            let llm = res.llm(c)?;
            let items = match dataset {
                Some(p) => load_dataset(p).map_err(CliError::setup)?,
                None if res.bundled => load_cdd().map_err(CliError::setup)?.questions,
                None => return Err(CliError::new("setup", "usage", "--dataset is required with a custom model")),
            };
            let seed_sql = match seed.clone().or_else(|| res.file.seed.clone()) {
                Some(p) => fs::read_to_string(&p).map_err(|e| CliError::setup(Error::io(&p, e)))?,
                None if res.bundled => fixtures::CDD_SEED.to_string(),
                None => return Err(CliError::new("setup", "usage", "--seed is required with a custom model")),
            };
            let executor = SqliteExecutor::new(model, &seed_sql);
            let protocol = Protocol {
                samples: settings.tosql.samples,
                threshold: *threshold,
                jobs: c.jobs.or(res.file.jobs).unwrap_or(1),
            };
            let rep = run_benchmark(&items, model, &llm, &executor, &settings, protocol);
            if let Some(p) = report {
                fs::write(p, rep.to_json()).map_err(|e| CliError::setup(Error::io(p, e)))?;
            }
            write_out(out, None, &rep.to_text())
        }
        Command::Explain { graph } => {
            if *graph {
                let g = build_graph(model).map_err(|e| CliError::new("model", "invalid_model", e.to_string()))?;
                return write_out(out, None, &g.to_dot());
            }
            let dir = res
                .run_dir(c)
                .ok_or_else(|| CliError::new("setup", "usage", "explain needs --run-dir"))?;
            let mut text = String::new();
            for (name, body) in rundir::read_artifacts(&dir).map_err(CliError::setup)? {
                text.push_str(&format!("== {name} ==\n{body}"));
                if !body.ends_with('\n') {
                    text.push('\n');
                }
            }
            write_out(out, None, &text)
        }
    }
}

fn solve_kind(e: &sqlweave_core::solver::SolveError) -> &'static str {
    use sqlweave_core::solver::SolveError as E;
    match e {
        E::Infeasible { .. } => "infeasible",
        E::UnknownTarget(_) => "unknown_target",
        E::NoTargets => "no_targets",
        E::UnreachableRoot(_) => "unreachable_root",
        E::Model(_) => "invalid_model",
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status: 0 on success, 1 on failure, 2 on usage errors.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.kind == "usage" {
                2
            } else {
                1
            }
        }
    }
}
