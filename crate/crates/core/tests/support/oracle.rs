//! Random walk problems and a brute-force reference solver.
//!
//! The reference works on plain indices and assigns one node (or the sink)
//! to every layer of a fixed horizon, then checks adjacency, coverage,
//! join-table placement and lookup returns on the complete assignment. It
//! shares no code with the library solver.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use sqlweave_core::graph::SchemaGraph;
use sqlweave_core::model::{FkConstraint, M2MTriplet};
use sqlweave_core::solver::PathProblem;

#[derive(Clone, Debug)]
pub struct RawProblem {
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub targets: BTreeSet<usize>,
    /// (left, right, join)
    pub m2m: Vec<(usize, usize, usize)>,
    pub lookup: BTreeSet<usize>,
    pub max_len: usize,
}

pub fn name(i: usize) -> String {
    format!("t{i}")
}

impl RawProblem {
    pub fn random<R: Rng>(rng: &mut R) -> RawProblem {
        let nodes = rng.gen_range(2..=8);
        let mut edges = BTreeSet::new();
        let n_edges = rng.gen_range(1..=nodes + 3);
        for _ in 0..n_edges {
            let a = rng.gen_range(0..nodes);
            let b = rng.gen_range(0..nodes);
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let mut m2m = Vec::new();
        let mut joins = BTreeSet::new();
        if nodes >= 3 {
            for _ in 0..rng.gen_range(0..=2) {
                let j = rng.gen_range(0..nodes);
                let l = rng.gen_range(0..nodes);
                let r = rng.gen_range(0..nodes);
                if j == l || j == r || l == r || joins.contains(&j) {
                    continue;
                }
                joins.insert(j);
                edges.insert((j.min(l), j.max(l)));
                edges.insert((j.min(r), j.max(r)));
                m2m.push((l, r, j));
            }
        }
        let mut lookup = BTreeSet::new();
        for _ in 0..rng.gen_range(0..=2) {
            let l = rng.gen_range(0..nodes);
            if !joins.contains(&l) {
                lookup.insert(l);
            }
        }
        let mut targets = BTreeSet::new();
        for _ in 0..rng.gen_range(1..=3) {
            targets.insert(rng.gen_range(0..nodes));
        }
        let max_len = rng.gen_range(targets.len().max(1)..=6);
        RawProblem {
            nodes,
            edges: edges.into_iter().collect(),
            targets,
            m2m,
            lookup,
            max_len,
        }
    }

    pub fn to_problem(&self) -> PathProblem {
        let names: Vec<String> = (0..self.nodes).map(name).collect();
        let constraints: Vec<FkConstraint> = self
            .edges
            .iter()
            .map(|&(a, b)| FkConstraint::new(name(a), &[format!("{}_id", name(b)).as_str()], name(b), &["id"]))
            .collect();
        let graph = SchemaGraph::from_parts(names.iter().map(String::as_str), constraints.iter());
        PathProblem::new(
            graph,
            self.targets.iter().map(|&t| name(t)).collect(),
            self.m2m.iter().map(|&(l, r, j)| M2MTriplet::new(name(l), name(r), name(j))).collect(),
            self.lookup.iter().map(|&t| name(t)).collect(),
        )
        .with_max_len(self.max_len)
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    fn triggered(&self, j: usize) -> bool {
        self.targets.contains(&j)
            || self
                .m2m
                .iter()
                .any(|&(l, r, jj)| jj == j && self.targets.contains(&l) && self.targets.contains(&r))
    }

    /// `layers[r]` is `Some(node)` or `None` for the sink.
    fn satisfied(&self, layers: &[Option<usize>]) -> bool {
        let n = layers.len();
        // The first layer holds a node; once in the sink, stay there.
        if layers[0].is_none() {
            return false;
        }
        for r in 1..n {
            if layers[r - 1].is_none() && layers[r].is_some() {
                return false;
            }
        }
        for r in 1..n {
            if let (Some(a), Some(b)) = (layers[r - 1], layers[r]) {
                if !self.adjacent(a, b) {
                    return false;
                }
            }
        }
        for &t in &self.targets {
            if !layers.contains(&Some(t)) {
                return false;
            }
        }
        let at = |r: isize| -> Option<usize> {
            if r < 0 || r as usize >= n {
                None
            } else {
                layers[r as usize]
            }
        };
        for &(_, _, j) in &self.m2m {
            if self.triggered(j) && layers.iter().filter(|x| **x == Some(j)).count() != 1 {
                return false;
            }
        }
        for r in 0..n as isize {
            let Some(t) = at(r) else { continue };
            for &(l, rr, j) in &self.m2m {
                if j == t {
                    let (p, s) = (at(r - 1), at(r + 1));
                    let ok = (p == Some(l) && s == Some(rr)) || (p == Some(rr) && s == Some(l));
                    if !ok {
                        return false;
                    }
                }
            }
            if self.lookup.contains(&t) && at(r - 1) != at(r + 1) {
                return false;
            }
        }
        true
    }

    fn cost(&self, layers: &[Option<usize>]) -> usize {
        layers
            .iter()
            .flatten()
            .filter(|t| !self.targets.contains(t))
            .count()
    }

    /// Minimum cost over every assignment of the horizon, or `None` when
    /// nothing is feasible.
    pub fn brute_force_cost(&self) -> Option<usize> {
        let mut layers = vec![None; self.max_len];
        let mut best = None;
        self.fill(0, &mut layers, &mut best);
        best
    }

    fn fill(&self, r: usize, layers: &mut Vec<Option<usize>>, best: &mut Option<usize>) {
        if r == layers.len() {
            if self.satisfied(layers) {
                let c = self.cost(layers);
                if best.map(|b| c < b).unwrap_or(true) {
                    *best = Some(c);
                }
            }
            return;
        }
        // Only prune what is structurally impossible: a node after the sink
        // or a non-adjacent step. Everything else is judged at the end.
        let prev = if r == 0 { None } else { Some(layers[r - 1]) };
        let mut options: Vec<Option<usize>> = vec![None];
        options.extend((0..self.nodes).map(Some));
        for o in options {
            if let (Some(p), Some(x)) = (prev, o) {
                match p {
                    None => continue,
                    Some(p) if !self.adjacent(p, x) => continue,
                    _ => {}
                }
            }
            layers[r] = o;
            self.fill(r + 1, layers, best);
        }
        layers[r] = None;
    }
}
