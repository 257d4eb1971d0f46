//! Result-set comparison (EX / ESX) and table/attribute coverage.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sqlparser::ast::{ObjectName, Query, SetExpr, Statement, TableFactor, TableWithJoins};
use sqlparser::dialect::{GenericDialect, MySqlDialect};
use sqlparser::parser::Parser;
use sqlparser::tokenizer::{Token, Tokenizer};
use thiserror::Error;

use crate::model::DatabaseModel;
use crate::view::ViewPlan;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
}

/// Comparison key: integers and reals share one scale (1e-9 resolution),
/// so `2` and `2.0` compare equal, and NULL equals NULL.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueKey {
    Null,
    Num(i128),
    Text(String),
}

const SCALE: f64 = 1e9;

impl Value {
    pub fn key(&self) -> ValueKey {
        match self {
            Value::Null => ValueKey::Null,
            Value::Int(i) => ValueKey::Num(*i as i128 * SCALE as i128),
            Value::Real(r) => ValueKey::Num(libm_round(r * SCALE) as i128),
            Value::Text(s) => ValueKey::Text(s.clone()),
        }
    }

    /// Parses a CSV cell: empty or `NULL` is NULL, then integer, real, text.
    pub fn parse_cell(s: &str) -> Value {
        let t = s.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("null") {
            Value::Null
        } else if let Ok(i) = t.parse::<i64>() {
            Value::Int(i)
        } else if let Ok(r) = t.parse::<f64>() {
            Value::Real(r)
        } else {
            Value::Text(s.to_string())
        }
    }
}

// `f64::round` is not available without std.
fn libm_round(x: f64) -> f64 {
    if !x.is_finite() {
        return 0.0;
    }
    let t = x as i128 as f64;
    let frac = x - t;
    if frac >= 0.5 {
        t + 1.0
    } else if frac <= -0.5 {
        t - 1.0
    } else {
        t
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultSet {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<Value>>) -> Self {
        ResultSet { columns, rows }
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn is_well_formed(&self) -> bool {
        self.rows.iter().all(|r| r.len() == self.columns.len())
    }

    fn keyed(&self) -> Vec<Vec<ValueKey>> {
        self.rows.iter().map(|r| r.iter().map(Value::key).collect()).collect()
    }
}

fn column_signature(rows: &[Vec<ValueKey>], c: usize) -> Vec<ValueKey> {
    let mut v: Vec<ValueKey> = rows.iter().map(|r| r[c].clone()).collect();
    v.sort();
    v
}

fn sorted_rows(mut rows: Vec<Vec<ValueKey>>) -> Vec<Vec<ValueKey>> {
    rows.sort();
    rows
}

/// Searches for an injective map from `g`'s columns into `f`'s columns
/// under which `f` projected equals `g` as a row multiset.
fn find_column_map(f: &ResultSet, g: &ResultSet, bijective: bool) -> bool {
    if !f.is_well_formed() || !g.is_well_formed() {
        return false;
    }
    if f.rows.len() != g.rows.len() || g.arity() > f.arity() || (bijective && f.arity() != g.arity()) {
        return false;
    }
    let fk = f.keyed();
    let gk = g.keyed();
    let target = sorted_rows(gk.clone());
    let fsig: Vec<Vec<ValueKey>> = (0..f.arity()).map(|c| column_signature(&fk, c)).collect();
    let gsig: Vec<Vec<ValueKey>> = (0..g.arity()).map(|c| column_signature(&gk, c)).collect();
    // Candidate f columns for each g column: equal value multisets.
    let cands: Vec<Vec<usize>> = gsig
        .iter()
        .map(|gs| (0..f.arity()).filter(|&i| &fsig[i] == gs).collect())
        .collect();
    if cands.iter().any(Vec::is_empty) {
        return false;
    }
    let mut used = vec![false; f.arity()];
    let mut map = vec![0usize; g.arity()];
    fn go(j: usize, cands: &[Vec<usize>], used: &mut [bool], map: &mut [usize], fk: &[Vec<ValueKey>], target: &[Vec<ValueKey>]) -> bool {
        if j == cands.len() {
            let proj: Vec<Vec<ValueKey>> = fk.iter().map(|r| map.iter().map(|&i| r[i].clone()).collect()).collect();
            return sorted_rows(proj) == target;
        }
        for &i in &cands[j] {
            if used[i] {
                continue;
            }
            used[i] = true;
            map[j] = i;
            if go(j + 1, cands, used, map, fk, target) {
                return true;
            }
            used[i] = false;
        }
        false
    }
    go(0, &cands, &mut used, &mut map, &fk, &target)
}

/// EX: some column permutation of `f` has the same row multiset as `g`.
pub fn execution_match(f: &ResultSet, g: &ResultSet) -> bool {
    find_column_map(f, g, true)
}

/// ESX: `g`'s columns embed injectively into `f`'s, and `f` projected onto
/// them has the same row multiset as `g`.
pub fn subset_match(f: &ResultSet, g: &ResultSet) -> bool {
    find_column_map(f, g, false)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlFootprint {
    pub tables: BTreeSet<String>,
    /// `table.attribute`; the table part is empty when it could not be
    /// resolved.
    pub attributes: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("cannot parse SQL: {0}")]
    Parse(String),
    #[error("ground truth mentions no tables")]
    EmptyGroundTruth,
}

fn object_name(n: &ObjectName) -> String {
    n.0.last()
        .and_then(|p| p.as_ident())
        .map(|i| i.value.to_lowercase())
        .unwrap_or_default()
}

#[derive(Default)]
struct Relations {
    tables: BTreeSet<String>,
    /// alias → table
    aliases: BTreeMap<String, String>,
}

impl Relations {
    fn factor(&mut self, f: &TableFactor) {
        match f {
            TableFactor::Table { name, alias, .. } => {
                let t = object_name(name);
                if let Some(a) = alias {
                    self.aliases.insert(a.name.value.to_lowercase(), t.clone());
                }
                self.tables.insert(t);
            }
            TableFactor::Derived { subquery, .. } => self.query(subquery),
            TableFactor::NestedJoin { table_with_joins, .. } => self.with_joins(table_with_joins),
            _ => {}
        }
    }

    fn with_joins(&mut self, t: &TableWithJoins) {
        self.factor(&t.relation);
        for j in &t.joins {
            self.factor(&j.relation);
        }
    }

    fn set_expr(&mut self, e: &SetExpr) {
        match e {
            SetExpr::Select(s) => {
                for t in &s.from {
                    self.with_joins(t);
                }
            }
            SetExpr::Query(q) => self.query(q),
            SetExpr::SetOperation { left, right, .. } => {
                self.set_expr(left);
                self.set_expr(right);
            }
            _ => {}
        }
    }

    fn query(&mut self, q: &Query) {
        if let Some(with) = &q.with {
            for cte in &with.cte_tables {
                self.query(&cte.query);
            }
        }
        self.set_expr(&q.body);
    }
}

/// Words treated as syntax, never as column names.
const RESERVED: &[&str] = &[
    "all", "and", "as", "asc", "between", "by", "case", "create", "cross", "desc", "distinct", "else", "end", "except",
    "exists", "false", "from", "full", "group", "having", "in", "inner", "intersect", "interval", "is", "join", "left",
    "like", "limit", "natural", "not", "null", "offset", "on", "or", "order", "outer", "replace", "right", "select",
    "then", "true", "union", "using", "view", "when", "where", "with",
];

fn is_reserved(w: &str) -> bool {
    RESERVED.contains(&w.to_ascii_lowercase().as_str())
}

/// Tables from `FROM`/`JOIN` clauses and attributes mentioned anywhere,
/// with table aliases resolved. Bare column names are qualified only when
/// the statement reads a single table.
pub fn sql_footprint(sql: &str) -> Result<SqlFootprint, MetricError> {
    footprint_impl(sql, None)
}

/// Like [`sql_footprint`], resolving bare column names through the schema
/// when exactly one referenced table has the column.
pub fn sql_footprint_with_model(sql: &str, model: &DatabaseModel) -> Result<SqlFootprint, MetricError> {
    footprint_impl(sql, Some(model))
}

fn parse_statements(sql: &str) -> Result<Vec<Statement>, MetricError> {
    Parser::parse_sql(&GenericDialect {}, sql)
        .or_else(|_| Parser::parse_sql(&MySqlDialect {}, sql))
        .map_err(|e| MetricError::Parse(e.to_string()))
}

fn footprint_impl(sql: &str, model: Option<&DatabaseModel>) -> Result<SqlFootprint, MetricError> {
    let stmts = parse_statements(sql)?;
    let mut rel = Relations::default();
    let mut view_names = BTreeSet::new();
    for s in &stmts {
        match s {
            Statement::Query(q) => rel.query(q),
            Statement::CreateView { name, query, .. } => {
                view_names.insert(object_name(name));
                rel.query(query);
            }
            _ => return Err(MetricError::Parse("expected SELECT or CREATE VIEW".into())),
        }
    }

    let tokens: Vec<Token> = Tokenizer::new(&MySqlDialect {}, sql)
        .tokenize()
        .map_err(|e| MetricError::Parse(e.to_string()))?
        .into_iter()
        .filter(|t| !matches!(t, Token::Whitespace(_)))
        .collect();

    // Subqueries outside FROM: pick up `from x` / `join x` from the tokens.
    for w in tokens.windows(2) {
        if let (Token::Word(k), Token::Word(t)) = (&w[0], &w[1]) {
            let kw = k.value.to_ascii_lowercase();
            if (kw == "from" || kw == "join") && k.quote_style.is_none() && !is_reserved(&t.value) {
                rel.tables.insert(t.value.to_lowercase());
            }
        }
    }

    let word = |i: usize| match tokens.get(i) {
        Some(Token::Word(w)) => Some(w),
        _ => None,
    };
    let resolve = |q: &str| -> String {
        let q = q.to_lowercase();
        rel.aliases.get(&q).cloned().unwrap_or(q)
    };
    let single = if rel.tables.len() == 1 { rel.tables.iter().next().cloned() } else { None };

    let mut attributes = BTreeSet::new();
    let mut i = 0;
    while i < tokens.len() {
        let Some(w) = word(i) else {
            i += 1;
            continue;
        };
        let name = w.value.to_lowercase();
        let prev_kw = word(i.wrapping_sub(1)).map(|p| p.value.to_ascii_lowercase());
        let next = tokens.get(i + 1);
        // Qualified reference `a.b`.
        if matches!(next, Some(Token::Period)) {
            if let Some(col) = word(i + 2) {
                if !matches!(tokens.get(i + 3), Some(Token::LParen)) {
                    attributes.insert(alloc::format!("{}.{}", resolve(&name), col.value.to_lowercase()));
                }
                i += 3;
                continue;
            }
        }
        let skip = (w.quote_style.is_none() && is_reserved(&name))
            || matches!(next, Some(Token::LParen))
            || matches!(prev_kw.as_deref(), Some("as") | Some("from") | Some("join") | Some("view"))
            || rel.tables.contains(&name)
            || rel.aliases.contains_key(&name)
            || view_names.contains(&name);
        if !skip {
            let owner = match model {
                Some(m) => {
                    let owners: Vec<&String> = rel
                        .tables
                        .iter()
                        .filter(|t| {
                            m.resolve_table(t)
                                .and_then(|r| m.table(r))
                                .map(|d| d.attributes.iter().any(|a| a.name.eq_ignore_ascii_case(&name)))
                                .unwrap_or(false)
                        })
                        .collect();
                    if owners.len() == 1 {
                        Some(owners[0].clone())
                    } else {
                        single.clone()
                    }
                }
                None => single.clone(),
            };
            attributes.insert(alloc::format!("{}.{}", owner.unwrap_or_default(), name));
        }
        i += 1;
    }

    let tables = rel.tables.into_iter().filter(|t| !t.is_empty()).collect();
    Ok(SqlFootprint { tables, attributes })
}

/// Footprint of a query over a summary view, expressed in base tables: the
/// view's tables, its join columns, and the source attribute of every
/// alias the query mentions.
pub fn footprint_through_view(query_sql: &str, view_name: &str, plan: &ViewPlan) -> Result<SqlFootprint, MetricError> {
    let q = sql_footprint(query_sql)?;
    let sources = plan.alias_sources();
    let view_name = view_name.to_lowercase();
    let mut out = SqlFootprint::default();
    for occ in plan.occurrences() {
        out.tables.insert(occ.table.to_lowercase());
    }
    for j in &plan.joins {
        for (pk, fk) in &j.on {
            out.attributes.insert(alloc::format!("{}.{}", pk.occ.table, pk.column).to_lowercase());
            out.attributes.insert(alloc::format!("{}.{}", fk.occ.table, fk.column).to_lowercase());
        }
    }
    for t in q.tables {
        if t != view_name {
            out.tables.insert(t);
        }
    }
    for a in q.attributes {
        let (qual, col) = a.split_once('.').unwrap_or(("", a.as_str()));
        let alias = sources.iter().find(|(k, _)| k.eq_ignore_ascii_case(col));
        match alias {
            Some((_, (t, attr))) if qual.is_empty() || qual == view_name => {
                out.attributes.insert(alloc::format!("{t}.{attr}").to_lowercase());
            }
            _ => {
                out.attributes.insert(a.clone());
            }
        }
    }
    Ok(out)
}

/// `(cover_t, cover_a)`: the share of `g`'s tables and attributes that also
/// appear in `f`. A ground truth without attributes gives `cover_a = 1`.
pub fn coverage(f: &SqlFootprint, g: &SqlFootprint) -> Result<(f64, f64), MetricError> {
    if g.tables.is_empty() {
        return Err(MetricError::EmptyGroundTruth);
    }
    let ct = g.tables.intersection(&f.tables).count() as f64 / g.tables.len() as f64;
    let ca = if g.attributes.is_empty() {
        1.0
    } else {
        g.attributes.intersection(&f.attributes).count() as f64 / g.attributes.len() as f64
    };
    Ok((ct, ca))
}
