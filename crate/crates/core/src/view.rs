//! Summary view construction: join the planned tables, project relevant
//! attributes under unique aliases, and print `CREATE VIEW`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DatabaseModel, FkConstraint};
use crate::retrieve::RelevanceSet;
use crate::solver::{DecomposedPlan, Walk};

pub const DEFAULT_ALIAS_LEN: usize = 64;
pub const DEFAULT_VIEW_NAME: &str = "v";

/// The `index`-th appearance (1-based) of `table` in a plan.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Occurrence {
    pub table: String,
    pub index: usize,
}

impl Occurrence {
    pub fn new(table: impl Into<String>, index: usize) -> Self {
        Occurrence {
            table: table.into(),
            index,
        }
    }

    /// Name used for this occurrence inside the SQL text.
    pub fn sql_name(&self) -> String {
        if self.index <= 1 {
            self.table.to_lowercase()
        } else {
            format!("{}_{}", self.table.to_lowercase(), self.index)
        }
    }
}

impl fmt::Display for Occurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.table, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum JoinKind {
    Inner,
    Left,
}

impl JoinKind {
    pub fn keyword(self) -> &'static str {
        match self {
            JoinKind::Inner => "join",
            JoinKind::Left => "left join",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnRef {
    pub occ: Occurrence,
    pub column: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Join {
    /// Occurrence already in the plan that the new one attaches to.
    pub source: Occurrence,
    pub target: Occurrence,
    pub kind: JoinKind,
    /// `(primary key side, foreign key side)` column pairs.
    pub on: Vec<(ColumnRef, ColumnRef)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection {
    pub occ: Occurrence,
    pub attribute: String,
    pub alias: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewPlan {
    pub base: Occurrence,
    pub joins: Vec<Join>,
    pub projections: Vec<Projection>,
}

impl ViewPlan {
    /// Occurrences in the order they enter the `FROM` clause.
    pub fn occurrences(&self) -> Vec<&Occurrence> {
        core::iter::once(&self.base).chain(self.joins.iter().map(|j| &j.target)).collect()
    }

    pub fn aliases(&self) -> Vec<&str> {
        self.projections.iter().map(|p| p.alias.as_str()).collect()
    }

    /// Maps each alias back to the source table and attribute.
    pub fn alias_sources(&self) -> BTreeMap<String, (String, String)> {
        self.projections
            .iter()
            .map(|p| (p.alias.clone(), (p.occ.table.clone(), p.attribute.clone())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ViewError {
    #[error("no key constraint joins `{from}` and `{to}`")]
    MissingConstraint { from: String, to: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("empty plan")]
    EmptyPlan,
    #[error("nothing to project")]
    NoProjections,
    #[error("identifier `{ident}` exceeds the {limit}-character limit")]
    IdentifierTooLong { ident: String, limit: usize },
    #[error("invalid view name `{0}`")]
    InvalidViewName(String),
}

fn truncate_chars(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// `table_attribute`, with `_k` appended for occurrence `k > 1`, lowercase
/// and cut to `max_len` characters. The occurrence suffix survives the cut.
pub fn make_alias(table: &str, occurrence: usize, attribute: &str, max_len: usize) -> String {
    let stem = format!("{}_{}", table, attribute).to_lowercase();
    let suffix = if occurrence > 1 {
        format!("_{occurrence}")
    } else {
        String::new()
    };
    let room = max_len.saturating_sub(suffix.chars().count());
    format!("{}{}", truncate_chars(&stem, room), suffix)
}

/// Hands out pairwise distinct aliases: a taken alias gets `_2`, `_3`, …
/// appended (shortening the stem to stay within the limit).
#[derive(Clone, Debug, Default)]
pub struct AliasSet {
    taken: Vec<String>,
    max_len: usize,
}

impl AliasSet {
    pub fn new(max_len: usize) -> Self {
        AliasSet {
            taken: Vec::new(),
            max_len,
        }
    }

    pub fn claim(&mut self, alias: String) -> String {
        let mut out = alias.clone();
        let mut n = 2;
        while self.taken.contains(&out) {
            let suffix = format!("_{n}");
            let room = self.max_len.saturating_sub(suffix.chars().count());
            out = format!("{}{}", truncate_chars(&alias, room), suffix);
            n += 1;
        }
        self.taken.push(out.clone());
        out
    }
}

struct Builder<'m> {
    model: &'m DatabaseModel,
    counts: BTreeMap<String, usize>,
    order: Vec<Occurrence>,
}

impl<'m> Builder<'m> {
    fn fresh(&mut self, table: &str) -> Occurrence {
        let c = self.counts.entry(table.to_string()).or_default();
        *c += 1;
        let occ = Occurrence::new(table, *c);
        self.order.push(occ.clone());
        occ
    }

    fn join(&self, source: &Occurrence, target: &Occurrence, c: &FkConstraint, kind: JoinKind) -> Join {
        // The side holding the foreign key columns.
        let (fk_occ, pk_occ) = if c.from_table == source.table && c.to_table == target.table {
            (source, target)
        } else {
            (target, source)
        };
        let on = c
            .column_pairs()
            .map(|(pk, fk)| {
                (
                    ColumnRef {
                        occ: pk_occ.clone(),
                        column: pk.to_string(),
                    },
                    ColumnRef {
                        occ: fk_occ.clone(),
                        column: fk.to_string(),
                    },
                )
            })
            .collect();
        Join {
            source: source.clone(),
            target: target.clone(),
            kind,
            on,
        }
    }

    fn constraint(&self, a: &str, b: &str) -> Result<FkConstraint, ViewError> {
        self.model
            .constraints_between(a, b)
            .min_by(|x, y| {
                (&x.fk_columns, &x.pk_columns, &x.from_table, &x.to_table).cmp(&(
                    &y.fk_columns,
                    &y.pk_columns,
                    &y.from_table,
                    &y.to_table,
                ))
            })
            .cloned()
            .ok_or_else(|| ViewError::MissingConstraint {
                from: a.to_string(),
                to: b.to_string(),
            })
    }

    fn projections(&self, relta: &RelevanceSet, max_len: usize) -> Result<Vec<Projection>, ViewError> {
        let mut aliases = AliasSet::new(max_len);
        let mut out = Vec::new();
        for occ in &self.order {
            if !relta.contains_table(&occ.table) {
                continue;
            }
            let def = self
                .model
                .table(&occ.table)
                .ok_or_else(|| ViewError::UnknownTable(occ.table.clone()))?;
            let mut cols: Vec<&str> = def.primary_key.iter().map(String::as_str).collect();
            for a in relta.attributes(&occ.table) {
                if !cols.contains(&a.as_str()) {
                    cols.push(a);
                }
            }
            for col in cols {
                let alias = aliases.claim(make_alias(&occ.table, occ.index, col, max_len));
                out.push(Projection {
                    occ: occ.clone(),
                    attribute: col.to_string(),
                    alias,
                });
            }
        }
        if out.is_empty() {
            return Err(ViewError::NoProjections);
        }
        Ok(out)
    }
}

fn walk_joins(b: &mut Builder<'_>, walk: &Walk) -> Result<(Occurrence, Vec<Join>), ViewError> {
    let first = walk.steps.first().ok_or(ViewError::EmptyPlan)?;
    let base = b.fresh(&first.table);
    let mut prev = base.clone();
    let mut joins = Vec::new();
    for step in &walk.steps[1..] {
        let c = match &step.via {
            Some(c) if c.connects(&prev.table, &step.table) => c.clone(),
            _ => b.constraint(&prev.table, &step.table)?,
        };
        let occ = b.fresh(&step.table);
        joins.push(b.join(&prev, &occ, &c, JoinKind::Inner));
        prev = occ;
    }
    Ok((base, joins))
}

/// Join plan for a decomposed solution: the core walk with inner joins,
/// then every branch as a chain of left joins from its root's first
/// occurrence. Repeated tables become separate occurrences.
pub fn plan_view(plan: &DecomposedPlan, relta: &RelevanceSet, model: &DatabaseModel) -> Result<ViewPlan, ViewError> {
    plan_view_with(plan, relta, model, DEFAULT_ALIAS_LEN)
}

pub fn plan_view_with(plan: &DecomposedPlan, relta: &RelevanceSet, model: &DatabaseModel, alias_len: usize) -> Result<ViewPlan, ViewError> {
    let mut b = Builder {
        model,
        counts: BTreeMap::new(),
        order: Vec::new(),
    };
    let (base, mut joins) = walk_joins(&mut b, &plan.core_walk)?;
    for branch in &plan.branches {
        let root = b
            .order
            .iter()
            .find(|o| o.table == branch.root)
            .cloned()
            .ok_or_else(|| ViewError::UnknownTable(branch.root.clone()))?;
        let mut prev = root;
        for (i, t) in branch.tables.iter().enumerate() {
            let c = match branch.hops.get(i) {
                Some(c) if c.connects(&prev.table, t) => c.clone(),
                _ => b.constraint(&prev.table, t)?,
            };
            let occ = b.fresh(t);
            joins.push(b.join(&prev, &occ, &c, JoinKind::Left));
            prev = occ;
        }
    }
    let projections = b.projections(relta, alias_len)?;
    Ok(ViewPlan {
        base,
        joins,
        projections,
    })
}

/// Join plan for a plain walk (no pattern branches).
pub fn plan_view_walk(walk: &Walk, relta: &RelevanceSet, model: &DatabaseModel) -> Result<ViewPlan, ViewError> {
    let mut b = Builder {
        model,
        counts: BTreeMap::new(),
        order: Vec::new(),
    };
    let (base, joins) = walk_joins(&mut b, walk)?;
    let projections = b.projections(relta, DEFAULT_ALIAS_LEN)?;
    Ok(ViewPlan {
        base,
        joins,
        projections,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    #[default]
    Generic,
    MySql,
}

impl Dialect {
    pub fn identifier_limit(self) -> usize {
        match self {
            Dialect::Generic => 128,
            Dialect::MySql => 64,
        }
    }

    pub fn parse(tag: &str) -> Option<Dialect> {
        match tag.to_ascii_lowercase().as_str() {
            "generic" | "ansi" => Some(Dialect::Generic),
            "mysql" => Some(Dialect::MySql),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dialect::Generic => "generic",
            Dialect::MySql => "mysql",
        }
    }

    fn quote(self, ident: &str) -> Result<String, ViewError> {
        let ident = ident.to_lowercase();
        if ident.chars().count() > self.identifier_limit() {
            return Err(ViewError::IdentifierTooLong {
                ident,
                limit: self.identifier_limit(),
            });
        }
        Ok(match self {
            Dialect::Generic => ident,
            Dialect::MySql => format!("`{}`", ident.replace('`', "``")),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewSql {
    pub view_name: String,
    pub sql_text: String,
}

pub fn emit_view_sql(plan: &ViewPlan, view_name: &str, dialect: Dialect) -> Result<ViewSql, ViewError> {
    if view_name.is_empty() || !view_name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(ViewError::InvalidViewName(view_name.to_string()));
    }
    if plan.projections.is_empty() {
        return Err(ViewError::NoProjections);
    }
    let q = |s: &str| dialect.quote(s);
    let occ_ref = |o: &Occurrence| -> Result<String, ViewError> { q(&o.sql_name()) };
    let table_clause = |o: &Occurrence| -> Result<String, ViewError> {
        if o.index <= 1 {
            q(&o.table)
        } else {
            Ok(format!("{} as {}", q(&o.table)?, occ_ref(o)?))
        }
    };

    let mut out = format!("create view {} as select\n", q(view_name)?);
    let n = plan.projections.len();
    for (i, p) in plan.projections.iter().enumerate() {
        out.push_str(&format!("  {}.{} as {}", occ_ref(&p.occ)?, q(&p.attribute)?, q(&p.alias)?));
        out.push_str(if i + 1 < n { ",\n" } else { "\n" });
    }
    out.push_str(&format!("from {}", table_clause(&plan.base)?));
    for j in &plan.joins {
        let mut conds = Vec::with_capacity(j.on.len());
        for (pk, fk) in &j.on {
            conds.push(format!(
                "{}.{} = {}.{}",
                occ_ref(&pk.occ)?,
                q(&pk.column)?,
                occ_ref(&fk.occ)?,
                q(&fk.column)?
            ));
        }
        out.push_str(&format!("\n{} {} on {}", j.kind.keyword(), table_clause(&j.target)?, conds.join(" and ")));
    }
    Ok(ViewSql {
        view_name: view_name.to_lowercase(),
        sql_text: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alias_rules() {
        assert_eq!(make_alias("Client", 1, "name", 64), "client_name");
        assert_eq!(make_alias("Pama", 2, "amount", 64), "pama_amount_2");
        assert_eq!(make_alias("abcdefghij", 3, "xyz", 8), "abcdef_3");
    }

    #[test]
    fn alias_set_disambiguates() {
        let mut s = AliasSet::new(8);
        let a = s.claim("abcdefgh".into());
        let b = s.claim("abcdefgh".into());
        let c = s.claim("abcdefgh".into());
        assert_eq!(a, "abcdefgh");
        assert_eq!(b, "abcdef_2");
        assert_eq!(c, "abcdef_3");
    }

    #[test]
    fn single_table_view() {
        let plan = ViewPlan {
            base: Occurrence::new("t", 1),
            joins: Vec::new(),
            projections: alloc::vec![Projection {
                occ: Occurrence::new("t", 1),
                attribute: "id".into(),
                alias: "t_id".into(),
            }],
        };
        let v = emit_view_sql(&plan, "v", Dialect::Generic).unwrap();
        assert_eq!(v.sql_text, "create view v as select\n  t.id as t_id\nfrom t");
        let m = emit_view_sql(&plan, "v", Dialect::MySql).unwrap();
        assert_eq!(m.sql_text, "create view `v` as select\n  `t`.`id` as `t_id`\nfrom `t`");
        assert!(matches!(emit_view_sql(&plan, "bad name", Dialect::Generic), Err(ViewError::InvalidViewName(_))));
    }

    #[test]
    fn overlong_identifier_rejected() {
        let long = "x".repeat(70);
        let plan = ViewPlan {
            base: Occurrence::new(long.clone(), 1),
            joins: Vec::new(),
            projections: alloc::vec![Projection {
                occ: Occurrence::new(long, 1),
                attribute: "id".into(),
                alias: "a".into(),
            }],
        };
        assert!(emit_view_sql(&plan, "v", Dialect::Generic).is_ok());
        assert!(matches!(
            emit_view_sql(&plan, "v", Dialect::MySql),
            Err(ViewError::IdentifierTooLong { limit: 64, .. })
        ));
    }
}
