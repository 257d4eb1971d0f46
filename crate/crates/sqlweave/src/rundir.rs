//! Phase artifacts on disk: `relevance.json`, `walk.txt`, `view.sql`,
//! `final.sql` and `phase_log.txt`. A failed run keeps whatever its
//! completed phases produced plus `error.txt`.

use std::fs;
use std::path::Path;

use sqlweave_core::pipeline::{PartialResult, PhaseEntry, PipelineError, PipelineResult};
use sqlweave_core::solver::DecomposedPlan;

use crate::error::Error;

pub const RELEVANCE_FILE: &str = "relevance.json";
pub const WALK_FILE: &str = "walk.txt";
pub const VIEW_FILE: &str = "view.sql";
pub const FINAL_FILE: &str = "final.sql";
pub const LOG_FILE: &str = "phase_log.txt";
pub const ERROR_FILE: &str = "error.txt";

/// Walk line, cost, then one line per branch.
pub fn render_plan(plan: &DecomposedPlan) -> String {
    let mut s = format!("walk: {}\ncost: {}\n", plan.core_walk, plan.core_walk.cost);
    for b in &plan.branches {
        s.push_str(&format!("branch: {} -> {}\n", b.root, b.tables.join(" -> ")));
    }
    s
}

fn render_log(log: &[PhaseEntry]) -> String {
    log.iter().map(|e| format!("{}: {}\n", e.phase, e.message)).collect()
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Error> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| Error::io(&p, e))
}

fn write_partial(dir: &Path, p: &PartialResult) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for name in [RELEVANCE_FILE, WALK_FILE, VIEW_FILE, FINAL_FILE, ERROR_FILE] {
        let _ = fs::remove_file(dir.join(name));
    }
    if let Some(r) = &p.relevance {
        let json = serde_json::to_string_pretty(r).expect("relevance serializes");
        write(dir, RELEVANCE_FILE, &(json + "\n"))?;
    }
    if let Some(plan) = &p.plan {
        write(dir, WALK_FILE, &render_plan(plan))?;
    }
    if let Some(v) = &p.view {
        write(dir, VIEW_FILE, &format!("{}\n", v.sql_text))?;
    }
    write(dir, LOG_FILE, &render_log(&p.phase_log))
}

pub fn save_result(dir: &Path, r: &PipelineResult) -> Result<(), Error> {
    write_partial(
        dir,
        &PartialResult {
            relevance: Some(r.relevance.clone()),
            plan: Some(r.plan.clone()),
            view: Some(r.view.clone()),
            phase_log: r.phase_log.clone(),
        },
    )?;
    write(dir, FINAL_FILE, &format!("{}\n", r.query.sql_text))
}

pub fn save_error(dir: &Path, e: &PipelineError) -> Result<(), Error> {
    write_partial(dir, &e.partial)?;
    write(dir, ERROR_FILE, &format!("{e}\n"))
}

/// Artifacts present in a run directory, in phase order.
pub fn read_artifacts(dir: &Path) -> Result<Vec<(&'static str, String)>, Error> {
    if !dir.is_dir() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "run directory not found")));
    }
    let mut out = Vec::new();
    for name in [RELEVANCE_FILE, WALK_FILE, VIEW_FILE, FINAL_FILE, LOG_FILE, ERROR_FILE] {
        let p = dir.join(name);
        if p.is_file() {
            out.push((name, fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?));
        }
    }
    Ok(out)
}
