//! Declarative feasibility check of a finished walk, written separately from
//! the search so the two can be tested against each other.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{PathProblem, Walk};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintId {
    /// Walk is empty or longer than the bound.
    Length,
    /// Consecutive steps are not joined by an edge.
    C1,
    /// A target table is missing.
    C2,
    /// Many-to-many join table misuse.
    C3,
    /// Lookup table not left the way it was entered.
    C4,
    /// Stated cost differs from the non-target step count.
    C5,
}

impl ConstraintId {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintId::Length => "length",
            ConstraintId::C1 => "C1",
            ConstraintId::C2 => "C2",
            ConstraintId::C3 => "C3",
            ConstraintId::C4 => "C4",
            ConstraintId::C5 => "C5",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    /// Zero-based step index, when the violation is local.
    pub position: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some(p) => write!(f, "{} at step {}: {}", self.constraint.as_str(), p, self.detail),
            None => write!(f, "{}: {}", self.constraint.as_str(), self.detail),
        }
    }
}

fn v(constraint: ConstraintId, position: Option<usize>, detail: String) -> Violation {
    Violation {
        constraint,
        position,
        detail,
    }
}

/// Lists every violated constraint. `Ok(())` iff the walk is feasible for
/// `p` and its recorded cost is right.
pub fn check_walk(w: &Walk, p: &PathProblem) -> Result<(), Vec<Violation>> {
    let tables = w.tables();
    let n = tables.len();
    let mut out = Vec::new();

    if n == 0 || n > p.max_len() {
        out.push(v(
            ConstraintId::Length,
            None,
            format!("walk has {} steps, allowed 1..={}", n, p.max_len()),
        ));
    }

    for (r, t) in tables.iter().enumerate() {
        if !p.graph.contains(t) {
            out.push(v(ConstraintId::C1, Some(r), format!("`{t}` is not a graph node")));
        }
    }
    for r in 1..n {
        let (a, b) = (tables[r - 1], tables[r]);
        if !p.graph.adjacent(a, b) {
            out.push(v(ConstraintId::C1, Some(r), format!("no edge between `{a}` and `{b}`")));
            continue;
        }
        if let Some(c) = &w.steps[r].via {
            if !c.connects(a, b) {
                out.push(v(
                    ConstraintId::C1,
                    Some(r),
                    format!("step constraint {c} does not join `{a}` and `{b}`"),
                ));
            }
        }
    }

    for t in &p.targets {
        if !tables.contains(&t.as_str()) {
            out.push(v(ConstraintId::C2, None, format!("target `{t}` not visited")));
        }
    }

    // Neighbors with the sink standing in past either end.
    let pred = |r: usize| if r == 0 { None } else { Some(tables[r - 1]) };
    let succ = |r: usize| tables.get(r + 1).copied();

    let triggered = p.triggered_joins();
    for j in &triggered {
        let occ = tables.iter().filter(|t| *t == j).count();
        if occ != 1 {
            out.push(v(
                ConstraintId::C3,
                None,
                format!("join table `{j}` must appear exactly once, appears {occ} times"),
            ));
        }
    }
    for (r, t) in tables.iter().enumerate() {
        for m in p.triplets_of(t) {
            let ok = match (pred(r), succ(r)) {
                (Some(a), Some(b)) => (a == m.left && b == m.right) || (a == m.right && b == m.left),
                _ => false,
            };
            if !ok {
                out.push(v(
                    ConstraintId::C3,
                    Some(r),
                    format!("`{t}` must sit between `{}` and `{}`", m.left, m.right),
                ));
            }
        }
    }

    for (r, t) in tables.iter().enumerate() {
        if p.lookup.contains(*t) && pred(r) != succ(r) {
            out.push(v(
                ConstraintId::C4,
                Some(r),
                format!("lookup `{t}` entered from {:?} but left toward {:?}", pred(r), succ(r)),
            ));
        }
    }

    let cost = p.cost_of(tables.iter().copied());
    if cost != w.cost {
        out.push(v(
            ConstraintId::C5,
            None,
            format!("recorded cost {} but walk has {} non-target steps", w.cost, cost),
        ));
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
