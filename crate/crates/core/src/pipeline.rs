//! Question → relevance set → join plan → view → final query.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::llm::LlmClient;
use crate::model::DatabaseModel;
use crate::retrieve::{Question, RelevanceSet, RetrieveError, RetrieveSettings, Retriever};
use crate::solver::{decompose_solve_with_stats, DecomposedPlan, SolveError, SolveStats};
use crate::tosql::{sample_queries, select_query, FinalQuery, ToSqlError, ToSqlSettings};
use crate::view::{emit_view_sql, plan_view_with, Dialect, ViewError, ViewPlan, ViewSql, DEFAULT_ALIAS_LEN, DEFAULT_VIEW_NAME};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Retrieve,
    Solve,
    View,
    ToSql,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Retrieve => "retrieve",
            Phase::Solve => "solve",
            Phase::View => "view",
            Phase::ToSql => "to-sql",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub phase: Phase,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub retrieve: RetrieveSettings,
    pub tosql: ToSqlSettings,
    pub max_len: Option<usize>,
    pub view_name: String,
    pub dialect: Dialect,
    pub alias_len: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            retrieve: RetrieveSettings::default(),
            tosql: ToSqlSettings::default(),
            max_len: None,
            view_name: DEFAULT_VIEW_NAME.to_string(),
            dialect: Dialect::Generic,
            alias_len: DEFAULT_ALIAS_LEN,
        }
    }
}

/// Outputs of the phases that completed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PartialResult {
    pub relevance: Option<RelevanceSet>,
    pub plan: Option<DecomposedPlan>,
    pub view: Option<ViewSql>,
    pub phase_log: Vec<PhaseEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub relevance: RelevanceSet,
    pub plan: DecomposedPlan,
    pub solve_stats: SolveStats,
    pub view_plan: ViewPlan,
    pub view: ViewSql,
    pub query: FinalQuery,
    /// Extracted SQL of every sample, `None` where extraction failed.
    pub samples: Vec<Option<String>>,
    pub phase_log: Vec<PhaseEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineError {
    pub phase: Phase,
    /// Short machine-readable tag such as `infeasible` or `retrieval_empty`.
    pub kind: &'static str,
    pub message: String,
    pub partial: Box<PartialResult>,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "phase={} kind={} message={:?}", self.phase, self.kind, self.message)
    }
}

fn retrieve_kind(e: &RetrieveError) -> &'static str {
    match e {
        RetrieveError::Empty { .. } => "retrieval_empty",
        RetrieveError::EmptyPrompt => "empty_prompt",
        RetrieveError::Llm { .. } => "llm",
    }
}

fn solve_kind(e: &SolveError) -> &'static str {
    match e {
        SolveError::Infeasible { .. } => "infeasible",
        SolveError::UnknownTarget(_) => "unknown_target",
        SolveError::NoTargets => "no_targets",
        SolveError::UnreachableRoot(_) => "unreachable_root",
        SolveError::Model(_) => "invalid_model",
    }
}

fn view_kind(e: &ViewError) -> &'static str {
    match e {
        ViewError::IdentifierTooLong { .. } => "identifier_too_long",
        ViewError::InvalidViewName(_) => "invalid_view_name",
        _ => "plan",
    }
}

fn tosql_kind(e: &ToSqlError) -> &'static str {
    match e {
        ToSqlError::NoSql { .. } | ToSqlError::AllSamplesFailed { .. } => "extraction",
        ToSqlError::NoSamples => "no_samples",
        ToSqlError::Llm(_) => "llm",
    }
}

pub fn answer_question<L: LlmClient + ?Sized>(
    q: &Question,
    model: &DatabaseModel,
    llm: &L,
    settings: &PipelineSettings,
) -> Result<PipelineResult, PipelineError> {
    let mut partial = PartialResult::default();
    let fail = |phase, kind, message: String, partial: &PartialResult| PipelineError {
        phase,
        kind,
        message,
        partial: Box::new(partial.clone()),
    };

    let mut retriever = Retriever::new(model, llm, settings.retrieve);
    let retrieved = retriever.retrieve(q);
    for ev in &retriever.log {
        let mut msg = format!("{}: selected [{}]", ev.node, ev.selected.join(", "));
        if !ev.dropped.is_empty() {
            msg.push_str(&format!(" dropped [{}]", ev.dropped.join(", ")));
        }
        partial.phase_log.push(PhaseEntry {
            phase: Phase::Retrieve,
            message: msg,
        });
    }
    let relevance = retrieved.map_err(|e| fail(Phase::Retrieve, retrieve_kind(&e), e.to_string(), &partial))?;
    partial.relevance = Some(relevance.clone());

    let (plan, solve_stats) = decompose_solve_with_stats(&relevance, model, settings.max_len)
        .map_err(|e| fail(Phase::Solve, solve_kind(&e), e.to_string(), &partial))?;
    partial.phase_log.push(PhaseEntry {
        phase: Phase::Solve,
        message: format!(
            "walk {} cost {} branches {} nodes {} horizon {}",
            plan.core_walk,
            plan.core_walk.cost,
            plan.branches.len(),
            solve_stats.nodes_expanded,
            solve_stats.horizon
        ),
    });
    partial.plan = Some(plan.clone());

    let view_plan = plan_view_with(&plan, &relevance, model, settings.alias_len)
        .map_err(|e| fail(Phase::View, view_kind(&e), e.to_string(), &partial))?;
    let view = emit_view_sql(&view_plan, &settings.view_name, settings.dialect)
        .map_err(|e| fail(Phase::View, view_kind(&e), e.to_string(), &partial))?;
    partial.phase_log.push(PhaseEntry {
        phase: Phase::View,
        message: format!("{} joins, {} columns", view_plan.joins.len(), view_plan.projections.len()),
    });
    partial.view = Some(view.clone());

    let sampled = sample_queries(q, &view, llm, settings.tosql, None)
        .map_err(|e| fail(Phase::ToSql, tosql_kind(&e), e.to_string(), &partial))?;
    let query = select_query(&sampled).map_err(|e| fail(Phase::ToSql, tosql_kind(&e), e.to_string(), &partial))?;
    partial.phase_log.push(PhaseEntry {
        phase: Phase::ToSql,
        message: format!("{} of {} samples agree", query.vote_count, query.sample_total),
    });

    Ok(PipelineResult {
        relevance,
        plan,
        solve_stats,
        view_plan,
        view,
        query,
        samples: sampled.into_iter().map(|(_, s)| s.ok()).collect(),
        phase_log: partial.phase_log,
    })
}
