//! Splits a relevance set into a walk over core tables plus tree branches
//! hanging off pattern roots.
//!
//! Inner tables of star and snowflake patterns never enter the walk search.
//! A relevant inner table instead makes its pattern root a target, and the
//! view reaches it along the unique root-to-table path of the pattern tree.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::search::{solve_path_with_stats, SolveStats};
use super::{PathProblem, SolveError, Walk};
use crate::graph::{build_graph, core_subgraph, SchemaGraph};
use crate::model::{DatabaseModel, FkConstraint};
use crate::retrieve::RelevanceSet;

/// Root-to-table path through one pattern tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub root: String,
    /// From the root's child down to the relevant table, inclusive.
    pub tables: Vec<String>,
    /// `hops[i]` joins `tables[i]` to its parent.
    pub hops: Vec<FkConstraint>,
}

impl Branch {
    pub fn leaf(&self) -> &str {
        self.tables.last().map(String::as_str).unwrap_or(&self.root)
    }

    pub fn parent_of(&self, i: usize) -> &str {
        if i == 0 {
            &self.root
        } else {
            &self.tables[i - 1]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecomposedPlan {
    pub problem: PathProblem,
    pub core_walk: Walk,
    pub branches: Vec<Branch>,
}

impl DecomposedPlan {
    /// Every table occurrence in join order: the walk, then each branch.
    pub fn occurrence_tables(&self) -> Vec<&str> {
        let mut out = self.core_walk.tables();
        for b in &self.branches {
            out.extend(b.tables.iter().map(String::as_str));
        }
        out
    }
}

pub fn decompose_solve(relta: &RelevanceSet, model: &DatabaseModel, max_len: Option<usize>) -> Result<DecomposedPlan, SolveError> {
    decompose_solve_with_stats(relta, model, max_len).map(|(p, _)| p)
}

pub fn decompose_solve_with_stats(
    relta: &RelevanceSet,
    model: &DatabaseModel,
    max_len: Option<usize>,
) -> Result<(DecomposedPlan, SolveStats), SolveError> {
    let full = build_graph(model)?;
    let core = core_subgraph(&full, model);

    let mut targets: BTreeSet<String> = BTreeSet::new();
    let mut inner: Vec<&str> = Vec::new();
    for t in relta.tables() {
        if !model.has_table(t) {
            return Err(SolveError::UnknownTarget(t.to_string()));
        }
        match model.pattern_containing_inner(t) {
            None => {
                targets.insert(t.to_string());
            }
            Some(p) => {
                if !core.contains(&p.root) || p.branch_to(t).is_none() {
                    return Err(SolveError::UnreachableRoot(t.to_string()));
                }
                targets.insert(p.root.clone());
                inner.push(t);
            }
        }
    }
    if targets.is_empty() {
        return Err(SolveError::NoTargets);
    }

    let m2m = model
        .m2m
        .iter()
        .filter(|m| core.contains(&m.join_table) && core.contains(&m.left) && core.contains(&m.right))
        .cloned()
        .collect();
    let lookup = model.lookup.iter().filter(|t| core.contains(t)).cloned().collect();
    let mut problem = PathProblem::new(core, targets, m2m, lookup);
    if let Some(n) = max_len {
        problem = problem.with_max_len(n);
    }
    let (core_walk, stats) = solve_path_with_stats(&problem)?;

    let branches = build_branches(&inner, model, &full, &core_walk)?;
    Ok((
        DecomposedPlan {
            problem,
            core_walk,
            branches,
        },
        stats,
    ))
}

fn build_branches(inner: &[&str], model: &DatabaseModel, full: &SchemaGraph, walk: &Walk) -> Result<Vec<Branch>, SolveError> {
    let walk_tables = walk.tables();
    let mut keyed: Vec<((usize, usize), Branch)> = Vec::new();
    for &t in inner {
        let p = model.pattern_containing_inner(t).expect("inner table has a pattern");
        let path = p.branch_to(t).ok_or_else(|| SolveError::UnreachableRoot(t.to_string()))?;
        // Tables that lie above another relevant table are covered by that
        // table's branch.
        let covered = inner.iter().any(|&o| {
            o != t
                && model.pattern_containing_inner(o).map(|q| q.root == p.root).unwrap_or(false)
                && p.branch_to(o).map(|bp| bp.iter().any(|x| x == t)).unwrap_or(false)
        });
        if covered {
            continue;
        }
        let mut hops = Vec::with_capacity(path.len());
        for (i, child) in path.iter().enumerate() {
            let parent = if i == 0 { p.root.as_str() } else { path[i - 1].as_str() };
            let c = full
                .chosen_constraint(parent, child)
                .ok_or_else(|| SolveError::UnreachableRoot(t.to_string()))?;
            hops.push(c.clone());
        }
        let root_pos = walk_tables
            .iter()
            .position(|w| *w == p.root)
            .ok_or_else(|| SolveError::UnreachableRoot(t.to_string()))?;
        let order = p.preorder().iter().position(|x| *x == t).unwrap_or(usize::MAX);
        if keyed.iter().any(|(_, b)| b.root == p.root && b.leaf() == t) {
            continue;
        }
        keyed.push((
            (root_pos, order),
            Branch {
                root: p.root.clone(),
                tables: path,
                hops,
            },
        ));
    }
    keyed.sort_by_key(|k| k.0);
    Ok(keyed.into_iter().map(|(_, b)| b).collect())
}
