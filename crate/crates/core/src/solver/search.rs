//! Depth-first branch and bound over partial walks.
//!
//! Partial walks are extended one step at a time in ascending table order.
//! Every extension is checked against the local parts of C1, C3 and C4, so
//! a complete walk only has to pass the coverage and boundary tests. Two
//! lower bounds prune the tree: hop distance to the farthest uncovered
//! must-visit table (length) and the cheapest number of non-target steps
//! needed to reach it (cost).

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Horizon, PathProblem, SolveError, Walk};

const UNREACHABLE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Partial walks that passed the bounds and were extended.
    pub nodes_expanded: u64,
    /// Deepest partial walk reached.
    pub max_depth: usize,
    /// Length bound under which the walk was found.
    pub horizon: usize,
}

/// Minimum-cost feasible walk. Ties on cost go to the shorter walk, then to
/// the walk whose reversed table sequence is lexicographically smallest.
pub fn solve_path(p: &PathProblem) -> Result<Walk, SolveError> {
    solve_path_with_stats(p).map(|(w, _)| w)
}

pub fn solve_path_with_stats(p: &PathProblem) -> Result<(Walk, SolveStats), SolveError> {
    if p.targets.is_empty() {
        return Err(SolveError::NoTargets);
    }
    if let Some(t) = p.targets.iter().find(|t| !p.graph.contains(t)) {
        return Err(SolveError::UnknownTarget(t.clone()));
    }
    let compiled = Compiled::new(p);
    let (lo, hi) = match p.horizon {
        Horizon::Fixed(n) => (n, n),
        Horizon::Deepening { start, bound } => (start.max(1), bound),
    };
    let mut stats = SolveStats::default();
    for n in lo..=hi {
        let mut search = Search::new(&compiled, n);
        search.run();
        stats.nodes_expanded += search.expanded;
        stats.max_depth = stats.max_depth.max(search.max_depth);
        if let Some(best) = search.best {
            stats.horizon = n;
            let mut seq = best.path;
            // The search finds the lexicographically smallest forward
            // sequence; reversal keeps feasibility and cost.
            seq.reverse();
            let names: Vec<&str> = seq.iter().map(|&i| compiled.names[i]).collect();
            let walk = Walk::from_tables(&names, &p.graph, &p.targets);
            debug_assert_eq!(walk.cost, best.cost);
            return Ok((walk, stats));
        }
    }
    Err(SolveError::Infeasible { max_len: hi })
}

struct Compiled<'a> {
    names: Vec<&'a str>,
    adj: Vec<Vec<usize>>,
    target: Vec<bool>,
    lookup: Vec<bool>,
    /// For each join table, the (left, right) pairs of its triplets.
    join_sides: Vec<Vec<(usize, usize)>>,
    triggered: Vec<bool>,
    /// Targets plus triggered join tables.
    must: Vec<usize>,
    dist: Vec<Vec<usize>>,
    /// Minimum number of non-target tables entered on the way to a node.
    wdist: Vec<Vec<usize>>,
}

impl<'a> Compiled<'a> {
    fn new(p: &'a PathProblem) -> Self {
        let names: Vec<&str> = p.graph.nodes.iter().map(|s| s.as_str()).collect();
        let idx = |t: &str| names.binary_search(&t).ok();
        let n = names.len();
        let mut adj = vec![Vec::new(); n];
        for e in &p.graph.edges {
            if let (Some(a), Some(b)) = (idx(&e.ends.0), idx(&e.ends.1)) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let target: Vec<bool> = names.iter().map(|t| p.targets.contains(*t)).collect();
        let lookup: Vec<bool> = names.iter().map(|t| p.lookup.contains(*t)).collect();
        let mut join_sides = vec![Vec::new(); n];
        let mut blocked = vec![false; n];
        for m in &p.m2m {
            let Some(j) = idx(&m.join_table) else { continue };
            match (idx(&m.left), idx(&m.right)) {
                (Some(l), Some(r)) => join_sides[j].push((l, r)),
                // A side outside the graph leaves no legal way through.
                _ => blocked[j] = true,
            }
        }
        let triggered_names = p.triggered_joins();
        let triggered: Vec<bool> = names.iter().map(|t| triggered_names.contains(t)).collect();
        let must: Vec<usize> = (0..n).filter(|&i| target[i] || triggered[i]).collect();
        for (j, b) in blocked.iter().enumerate() {
            if *b {
                // Represent "unusable" as an impossible side pair.
                join_sides[j].push((usize::MAX, usize::MAX));
            }
        }
        let dist = (0..n).map(|s| bfs(&adj, s)).collect();
        let wdist = (0..n).map(|s| zero_one_bfs(&adj, &target, s)).collect();
        Compiled {
            names,
            adj,
            target,
            lookup,
            join_sides,
            triggered,
            must,
            dist,
            wdist,
        }
    }

    fn is_join(&self, i: usize) -> bool {
        !self.join_sides[i].is_empty()
    }
}

fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<usize> {
    let mut d = vec![UNREACHABLE; adj.len()];
    let mut q = VecDeque::new();
    d[s] = 0;
    q.push_back(s);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if d[v] == UNREACHABLE {
                d[v] = d[u] + 1;
                q.push_back(v);
            }
        }
    }
    d
}

fn zero_one_bfs(adj: &[Vec<usize>], target: &[bool], s: usize) -> Vec<usize> {
    let mut d = vec![UNREACHABLE; adj.len()];
    let mut q = VecDeque::new();
    d[s] = 0;
    q.push_back(s);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            let w = usize::from(!target[v]);
            if d[u] + w < d[v] {
                d[v] = d[u] + w;
                if w == 0 {
                    q.push_front(v);
                } else {
                    q.push_back(v);
                }
            }
        }
    }
    d
}

struct Best {
    cost: usize,
    path: Vec<usize>,
}

struct Search<'c, 'a> {
    c: &'c Compiled<'a>,
    max_len: usize,
    path: Vec<usize>,
    occ: Vec<usize>,
    covered: usize,
    cost: usize,
    best: Option<Best>,
    expanded: u64,
    max_depth: usize,
}

impl<'c, 'a> Search<'c, 'a> {
    fn new(c: &'c Compiled<'a>, max_len: usize) -> Self {
        Search {
            c,
            max_len,
            path: Vec::with_capacity(max_len),
            occ: vec![0; c.names.len()],
            covered: 0,
            cost: 0,
            best: None,
            expanded: 0,
            max_depth: 0,
        }
    }

    fn run(&mut self) {
        if self.max_len == 0 || self.c.must.len() > self.max_len {
            return;
        }
        for v in 0..self.c.names.len() {
            if self.c.is_join(v) {
                continue;
            }
            self.push(v);
            self.descend();
            self.pop();
        }
    }

    fn is_must(&self, v: usize) -> bool {
        self.c.target[v] || self.c.triggered[v]
    }

    fn push(&mut self, v: usize) {
        if self.occ[v] == 0 && self.is_must(v) {
            self.covered += 1;
        }
        self.occ[v] += 1;
        self.cost += usize::from(!self.c.target[v]);
        self.path.push(v);
    }

    fn pop(&mut self) {
        let v = self.path.pop().expect("pop on empty walk");
        self.occ[v] -= 1;
        self.cost -= usize::from(!self.c.target[v]);
        if self.occ[v] == 0 && self.is_must(v) {
            self.covered -= 1;
        }
    }

    fn better_than_best(&self, cost: usize, len: usize) -> bool {
        match &self.best {
            None => true,
            Some(b) => (cost, len) < (b.cost, b.path.len()),
        }
    }

    fn is_complete(&self) -> bool {
        let last = *self.path.last().expect("non-empty");
        if self.c.is_join(last) {
            return false;
        }
        if self.c.lookup[last] && self.path.len() > 1 {
            return false;
        }
        self.covered == self.c.must.len()
    }

    fn descend(&mut self) {
        let len = self.path.len();
        self.max_depth = self.max_depth.max(len);
        let u = self.path[len - 1];

        // Bounds from the uncovered must-visit tables.
        let mut dlb = 0;
        let mut clb = 0;
        let mut uncovered = 0;
        let mut uncovered_cost = 0;
        for &t in &self.c.must {
            if self.occ[t] > 0 {
                continue;
            }
            let d = self.c.dist[u][t];
            if d == UNREACHABLE {
                return;
            }
            uncovered += 1;
            uncovered_cost += usize::from(!self.c.target[t]);
            dlb = dlb.max(d);
            clb = clb.max(self.c.wdist[u][t]);
        }
        let dlb = dlb.max(uncovered);
        let clb = clb.max(uncovered_cost);
        if len + dlb > self.max_len || !self.better_than_best(self.cost + clb, len + dlb) {
            return;
        }
        self.expanded += 1;

        if uncovered == 0 && self.is_complete() && self.better_than_best(self.cost, len) {
            self.best = Some(Best {
                cost: self.cost,
                path: self.path.clone(),
            });
            // Any extension is longer and no cheaper.
            return;
        }
        if len == self.max_len {
            return;
        }
        let pred = (len >= 2).then(|| self.path[len - 2]);
        for &v in &self.c.adj[u] {
            if !self.can_step(pred, u, v) {
                continue;
            }
            self.push(v);
            self.descend();
            self.pop();
        }
    }

    /// Local feasibility of appending `v` after `u` (whose predecessor is
    /// `pred`, or the sink).
    fn can_step(&self, pred: Option<usize>, u: usize, v: usize) -> bool {
        let c = self.c;
        if c.lookup[u] {
            // Must leave toward where it came from; a first step has the sink
            // as predecessor and therefore no exit.
            match pred {
                Some(p) if p == v => {}
                _ => return false,
            }
        }
        if c.is_join(u) {
            let Some(p) = pred else { return false };
            let ok = c.join_sides[u]
                .iter()
                .all(|&(l, r)| (p == l && v == r) || (p == r && v == l));
            if !ok {
                return false;
            }
        }
        if c.is_join(v) {
            if !c.join_sides[v].iter().all(|&(l, r)| u == l || u == r) {
                return false;
            }
            if c.triggered[v] && self.occ[v] > 0 {
                return false;
            }
        }
        true
    }
}
