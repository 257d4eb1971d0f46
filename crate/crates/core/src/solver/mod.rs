//! Constrained minimum-cost walk search over the schema graph.
//!
//! A walk `P` is a sequence of tables. A feasible walk
//!
//! * follows graph edges between consecutive steps (C1),
//! * visits every target table (C2),
//! * passes through a many-to-many join table only between its two side
//!   tables, and visits a *triggered* join table exactly once (C3),
//! * leaves a lookup table the same way it entered it (C4),
//!
//! and its cost is the number of steps on non-target tables (C5).
//!
//! The walk is read as the layered assignment `b[i][r]` ("table `i` is the
//! `r`-th step") padded on both sides by the absorbing sink: a missing
//! predecessor or successor counts as the sink. Consequently a join table
//! can never be the first or last step, and a lookup table can only open or
//! close the walk when it is the whole walk.

mod check;
mod decompose;
mod search;

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_graph, SchemaGraph};
use crate::model::{DatabaseModel, FkConstraint, M2MTriplet};
use crate::retrieve::RelevanceSet;

pub use check::{check_walk, ConstraintId, Violation};
pub use decompose::{decompose_solve, decompose_solve_with_stats, Branch, DecomposedPlan};
pub use search::{solve_path, solve_path_with_stats, SolveStats};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("no feasible walk within {max_len} steps")]
    Infeasible { max_len: usize },
    #[error("target table `{0}` is not in the solving graph")]
    UnknownTarget(String),
    #[error("no target tables")]
    NoTargets,
    #[error("pattern root for relevant inner table `{0}` is unreachable")]
    UnreachableRoot(String),
    #[error(transparent)]
    Model(#[from] crate::error::ModelError),
}

/// How the walk length bound is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    /// Optimize over all walks of at most this many steps.
    Fixed(usize),
    /// Grow the bound one step at a time from `start` to `bound` and stop at
    /// the first bound admitting a feasible walk.
    Deepening { start: usize, bound: usize },
}

impl Horizon {
    pub fn max_len(self) -> usize {
        match self {
            Horizon::Fixed(n) => n,
            Horizon::Deepening { bound, .. } => bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathProblem {
    pub graph: SchemaGraph,
    pub targets: BTreeSet<String>,
    pub m2m: Vec<M2MTriplet>,
    pub lookup: BTreeSet<String>,
    pub horizon: Horizon,
}

impl PathProblem {
    /// Problem with the default deepening horizon: from the number of
    /// tables that must appear up to `|V| + |T|`.
    pub fn new(graph: SchemaGraph, targets: BTreeSet<String>, m2m: Vec<M2MTriplet>, lookup: BTreeSet<String>) -> Self {
        let mut p = PathProblem {
            graph,
            targets,
            m2m,
            lookup,
            horizon: Horizon::Fixed(0),
        };
        let start = p.targets.len() + p.triggered_joins().iter().filter(|j| !p.targets.contains(**j)).count();
        let bound = (p.graph.nodes.len() + p.targets.len()).max(start);
        p.horizon = Horizon::Deepening { start, bound };
        p
    }

    pub fn with_max_len(mut self, max_len: usize) -> Self {
        self.horizon = Horizon::Fixed(max_len);
        self
    }

    pub fn max_len(&self) -> usize {
        self.horizon.max_len()
    }

    /// Join tables that must occur exactly once: both sides are targets, or
    /// the join table itself is.
    pub fn triggered_joins(&self) -> BTreeSet<&str> {
        self.m2m
            .iter()
            .filter(|m| {
                (self.targets.contains(&m.left) && self.targets.contains(&m.right)) || self.targets.contains(&m.join_table)
            })
            .map(|m| m.join_table.as_str())
            .collect()
    }

    pub fn triplets_of<'a>(&'a self, join_table: &'a str) -> impl Iterator<Item = &'a M2MTriplet> + 'a {
        self.m2m.iter().filter(move |m| m.join_table == join_table)
    }

    /// Number of steps on tables outside the target set.
    pub fn cost_of<'a>(&self, tables: impl IntoIterator<Item = &'a str>) -> usize {
        tables.into_iter().filter(|t| !self.targets.contains(*t)).count()
    }
}

/// Builds the walk problem for the tables of `relta` over the full schema
/// graph. Without `max_len` the horizon deepens from the minimum.
pub fn formulate_csp(relta: &RelevanceSet, model: &DatabaseModel, max_len: Option<usize>) -> Result<PathProblem, SolveError> {
    let graph = build_graph(model)?;
    let targets: BTreeSet<String> = relta.tables().map(str::to_string).collect();
    if targets.is_empty() {
        return Err(SolveError::NoTargets);
    }
    if let Some(t) = targets.iter().find(|t| !graph.contains(t)) {
        return Err(SolveError::UnknownTarget(t.clone()));
    }
    let m2m = model.m2m.iter().filter(|m| graph.contains(&m.join_table)).cloned().collect();
    let lookup = model.lookup.iter().filter(|t| graph.contains(t)).cloned().collect();
    let p = PathProblem::new(graph, targets, m2m, lookup);
    Ok(match max_len {
        Some(n) => p.with_max_len(n),
        None => p,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub table: String,
    /// Constraint used to arrive from the previous step; `None` on the first.
    pub via: Option<FkConstraint>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Walk {
    pub steps: Vec<Step>,
    pub cost: usize,
}

impl Walk {
    /// Walk over `tables`, picking the join constraint for each hop from
    /// `graph`. Hops without an edge get `via: None`; cost is computed
    /// against `targets`.
    pub fn from_tables(tables: &[&str], graph: &SchemaGraph, targets: &BTreeSet<String>) -> Walk {
        let steps = tables
            .iter()
            .enumerate()
            .map(|(i, t)| Step {
                table: t.to_string(),
                via: (i > 0)
                    .then(|| graph.chosen_constraint(tables[i - 1], t).cloned())
                    .flatten(),
            })
            .collect();
        let cost = tables.iter().filter(|t| !targets.contains(**t)).count();
        Walk { steps, cost }
    }

    pub fn tables(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.table.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl fmt::Display for Walk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.tables().join(", "))
    }
}
