//! Abstract schema graph: one node per table, one undirected edge per key
//! constraint. Edges remember the constraint so joins can be oriented.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{DatabaseModel, FkConstraint, TreePattern};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    /// Endpoints in ascending order.
    pub ends: (String, String),
    pub constraint: FkConstraint,
}

impl Edge {
    fn from_constraint(c: &FkConstraint) -> Self {
        let (a, b) = if c.from_table <= c.to_table {
            (c.from_table.clone(), c.to_table.clone())
        } else {
            (c.to_table.clone(), c.from_table.clone())
        };
        Edge {
            ends: (a, b),
            constraint: c.clone(),
        }
    }

    pub fn touches(&self, t: &str) -> bool {
        self.ends.0 == t || self.ends.1 == t
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaGraph {
    pub nodes: BTreeSet<String>,
    /// Sorted; parallel edges are kept, one per constraint.
    pub edges: Vec<Edge>,
}

impl SchemaGraph {
    /// Graph over an explicit node set and constraint list. Constraints with
    /// an endpoint outside `nodes` are skipped.
    pub fn from_parts<'a>(nodes: impl IntoIterator<Item = &'a str>, constraints: impl IntoIterator<Item = &'a FkConstraint>) -> Self {
        let nodes: BTreeSet<String> = nodes.into_iter().map(str::to_string).collect();
        let mut edges: Vec<Edge> = constraints
            .into_iter()
            .filter(|c| nodes.contains(&c.from_table) && nodes.contains(&c.to_table))
            .map(Edge::from_constraint)
            .collect();
        edges.sort();
        SchemaGraph { nodes, edges }
    }

    pub fn contains(&self, t: &str) -> bool {
        self.nodes.contains(t)
    }

    pub fn neighbors(&self, t: &str) -> BTreeSet<&str> {
        self.edges
            .iter()
            .filter_map(|e| {
                if e.ends.0 == t {
                    Some(e.ends.1.as_str())
                } else if e.ends.1 == t {
                    Some(e.ends.0.as_str())
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        self.edges_between(a, b).next().is_some()
    }

    /// Incident edge count (parallel edges counted separately).
    pub fn degree(&self, t: &str) -> usize {
        self.edges.iter().filter(|e| e.touches(t)).count()
    }

    pub fn edges_between<'a>(&'a self, a: &'a str, b: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.constraint.connects(a, b))
    }

    /// The constraint used to step between `a` and `b`. Among parallel
    /// edges the one with the smallest column lists wins.
    pub fn chosen_constraint(&self, a: &str, b: &str) -> Option<&FkConstraint> {
        self.edges
            .iter()
            .filter(|e| e.constraint.connects(a, b))
            .map(|e| &e.constraint)
            .min_by(|x, y| {
                (&x.fk_columns, &x.pk_columns, &x.from_table, &x.to_table).cmp(&(
                    &y.fk_columns,
                    &y.pk_columns,
                    &y.from_table,
                    &y.to_table,
                ))
            })
    }

    /// Subgraph induced by `keep`.
    pub fn induced(&self, keep: impl Fn(&str) -> bool) -> SchemaGraph {
        let nodes: BTreeSet<String> = self.nodes.iter().filter(|n| keep(n)).cloned().collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| nodes.contains(&e.ends.0) && nodes.contains(&e.ends.1))
            .cloned()
            .collect();
        SchemaGraph { nodes, edges }
    }

    /// Graphviz rendering, one line per node and edge.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph schema {\n");
        for n in &self.nodes {
            out.push_str(&format!("  \"{}\";\n", n));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  \"{}\" -- \"{}\" [label=\"{}({}) -> {}({})\"];\n",
                e.ends.0,
                e.ends.1,
                e.constraint.from_table,
                e.constraint.fk_columns.join(","),
                e.constraint.to_table,
                e.constraint.pk_columns.join(",")
            ));
        }
        out.push_str("}\n");
        out
    }
}

pub fn build_graph(model: &DatabaseModel) -> Result<SchemaGraph, ModelError> {
    let diagnostics = model.validate();
    if !diagnostics.is_empty() {
        return Err(ModelError::Invalid(diagnostics));
    }
    Ok(SchemaGraph::from_parts(model.table_names(), &model.constraints))
}

/// Restriction of `g` to tables that are not inner tables of any pattern.
pub fn core_subgraph(g: &SchemaGraph, model: &DatabaseModel) -> SchemaGraph {
    g.induced(|t| !model.is_pattern_inner(t))
}

pub fn pattern_tree<'m>(model: &'m DatabaseModel, root: &str) -> Result<&'m TreePattern, ModelError> {
    if !model.has_table(root) {
        return Err(ModelError::UnknownTable(root.to_string()));
    }
    model
        .pattern_rooted_at(root)
        .ok_or_else(|| ModelError::NotPatternRoot(root.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttributeDef, TableDef};

    fn table(name: &str, cols: &[&str]) -> TableDef {
        let mut t = TableDef::new(name);
        for c in cols {
            t.attributes.push(AttributeDef::new(*c, "int"));
        }
        t.primary_key.push(cols[0].to_string());
        t
    }

    #[test]
    fn parallel_edges_kept_and_tie_broken() {
        let m = DatabaseModel {
            tables: alloc::vec![table("a", &["id"]), table("b", &["id", "x_id", "y_id"])],
            constraints: alloc::vec![
                FkConstraint::new("b", &["y_id"], "a", &["id"]),
                FkConstraint::new("b", &["x_id"], "a", &["id"]),
            ],
            ..Default::default()
        };
        let g = build_graph(&m).unwrap();
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.neighbors("a").len(), 1);
        assert_eq!(g.chosen_constraint("a", "b").unwrap().fk_columns, alloc::vec!["x_id".to_string()]);
    }

    #[test]
    fn edgeless_graph() {
        let m = DatabaseModel {
            tables: alloc::vec![table("a", &["id"]), table("b", &["id"])],
            ..Default::default()
        };
        let g = build_graph(&m).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert!(g.edges.is_empty());
        assert_eq!(core_subgraph(&g, &m), g);
    }

    #[test]
    fn invalid_model_rejected() {
        let m = DatabaseModel {
            tables: alloc::vec![table("a", &["id"])],
            constraints: alloc::vec![FkConstraint::new("a", &["id"], "zz", &["id"])],
            ..Default::default()
        };
        assert!(matches!(build_graph(&m), Err(ModelError::Invalid(_))));
    }
}
