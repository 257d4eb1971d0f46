//! The database model: tables, key constraints and the relationship
//! patterns (many-to-many, lookup, star and snowflake) layered on top.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub sql_type: String,
    /// Nullability/default clause as written, e.g. `NOT NULL` or `DEFAULT NULL`.
    pub nullability_default: String,
    pub description: String,
}

impl AttributeDef {
    pub fn new(name: impl Into<String>, sql_type: impl Into<String>) -> Self {
        AttributeDef {
            name: name.into(),
            sql_type: sql_type.into(),
            nullability_default: String::new(),
            description: String::new(),
        }
    }

    pub fn not_null(mut self) -> Self {
        self.nullability_default = "NOT NULL".into();
        self
    }

    pub fn described(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub attributes: Vec<AttributeDef>,
    pub primary_key: Vec<String>,
    pub description: String,
}

impl TableDef {
    pub fn new(name: impl Into<String>) -> Self {
        TableDef {
            name: name.into(),
            attributes: Vec::new(),
            primary_key: Vec::new(),
            description: String::new(),
        }
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.attribute(name).is_some()
    }

    /// Position of an attribute in declaration order.
    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }
}

/// Cardinality of a key relationship, seen from the referencing table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cardinality {
    OneToOne,
    ManyToOne,
}

impl Cardinality {
    /// The `sqlrelation` tag used in model documents.
    pub fn tag(self) -> &'static str {
        match self {
            Cardinality::OneToOne => "1:1",
            Cardinality::ManyToOne => "M:1",
        }
    }
}

/// A foreign key from `from_table(fk_columns)` to `to_table(pk_columns)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FkConstraint {
    pub from_table: String,
    pub fk_columns: Vec<String>,
    pub to_table: String,
    pub pk_columns: Vec<String>,
    pub kind: Cardinality,
}

impl FkConstraint {
    pub fn new(
        from_table: impl Into<String>,
        fk_columns: &[&str],
        to_table: impl Into<String>,
        pk_columns: &[&str],
    ) -> Self {
        FkConstraint {
            from_table: from_table.into(),
            fk_columns: fk_columns.iter().map(|c| c.to_string()).collect(),
            to_table: to_table.into(),
            pk_columns: pk_columns.iter().map(|c| c.to_string()).collect(),
            kind: Cardinality::ManyToOne,
        }
    }

    pub fn one_to_one(mut self) -> Self {
        self.kind = Cardinality::OneToOne;
        self
    }

    /// True if the constraint connects `a` and `b` in either direction.
    pub fn connects(&self, a: &str, b: &str) -> bool {
        (self.from_table == a && self.to_table == b) || (self.from_table == b && self.to_table == a)
    }

    /// The endpoint opposite to `t`, if `t` is an endpoint.
    pub fn other_end(&self, t: &str) -> Option<&str> {
        if self.from_table == t {
            Some(&self.to_table)
        } else if self.to_table == t {
            Some(&self.from_table)
        } else {
            None
        }
    }

    /// Equality pairs `(pk column, fk column)` in declaration order.
    pub fn column_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pk_columns
            .iter()
            .zip(self.fk_columns.iter())
            .map(|(p, f)| (p.as_str(), f.as_str()))
    }
}

impl fmt::Display for FkConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({}) -> {}({})",
            self.from_table,
            self.fk_columns.join(", "),
            self.to_table,
            self.pk_columns.join(", ")
        )
    }
}

/// A many-to-many relationship between `left` and `right` realized by
/// `join_table`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct M2MTriplet {
    pub left: String,
    pub right: String,
    pub join_table: String,
}

impl M2MTriplet {
    pub fn new(left: impl Into<String>, right: impl Into<String>, join_table: impl Into<String>) -> Self {
        M2MTriplet {
            left: left.into(),
            right: right.into(),
            join_table: join_table.into(),
        }
    }

    pub fn is_side(&self, t: &str) -> bool {
        self.left == t || self.right == t
    }

    pub fn opposite_side(&self, t: &str) -> Option<&str> {
        if self.left == t {
            Some(&self.right)
        } else if self.right == t {
            Some(&self.left)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternKind {
    Star,
    Snowflake,
}

impl PatternKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::Star => "star",
            PatternKind::Snowflake => "snowflake",
        }
    }
}

/// A rooted tree of tables: the fact table at the root, dimension tables
/// below it. Child lists keep declaration order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreePattern {
    pub kind: PatternKind,
    pub root: String,
    pub children: BTreeMap<String, Vec<String>>,
}

impl TreePattern {
    pub fn new(kind: PatternKind, root: impl Into<String>) -> Self {
        TreePattern {
            kind,
            root: root.into(),
            children: BTreeMap::new(),
        }
    }

    /// Builder helper: declare `children` under `parent`.
    pub fn with_children(mut self, parent: &str, children: &[&str]) -> Self {
        self.children
            .entry(parent.to_string())
            .or_default()
            .extend(children.iter().map(|c| c.to_string()));
        self
    }

    pub fn children(&self, t: &str) -> &[String] {
        self.children.get(t).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_leaf(&self, t: &str) -> bool {
        self.children(t).is_empty()
    }

    pub fn parent(&self, t: &str) -> Option<&str> {
        self.children
            .iter()
            .find(|(_, kids)| kids.iter().any(|k| k == t))
            .map(|(p, _)| p.as_str())
    }

    pub fn contains(&self, t: &str) -> bool {
        self.root == t || self.is_inner(t)
    }

    pub fn is_inner(&self, t: &str) -> bool {
        self.children.values().any(|kids| kids.iter().any(|k| k == t))
    }

    /// Nodes in breadth-first order starting at the root.
    pub fn bfs(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        let mut queue = alloc::collections::VecDeque::new();
        queue.push_back(self.root.as_str());
        while let Some(t) = queue.pop_front() {
            if out.contains(&t) {
                continue;
            }
            out.push(t);
            for c in self.children(t) {
                queue.push_back(c.as_str());
            }
        }
        out
    }

    /// Nodes in depth-first pre-order following declaration order.
    pub fn preorder(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![self.root.as_str()];
        while let Some(t) = stack.pop() {
            if out.contains(&t) {
                continue;
            }
            out.push(t);
            for c in self.children(t).iter().rev() {
                stack.push(c.as_str());
            }
        }
        out
    }

    /// Inner tables (every node except the root), pre-order.
    pub fn inner_tables(&self) -> Vec<&str> {
        self.preorder().into_iter().skip(1).collect()
    }

    /// Tables from the root's child down to `t`, inclusive. `None` if `t`
    /// is not an inner node.
    pub fn branch_to(&self, t: &str) -> Option<Vec<String>> {
        if !self.is_inner(t) {
            return None;
        }
        let mut path = alloc::vec![t.to_string()];
        let mut cur = t;
        while let Some(p) = self.parent(cur) {
            if p == self.root {
                path.reverse();
                return Some(path);
            }
            if path.iter().any(|x| x == p) {
                return None;
            }
            path.push(p.to_string());
            cur = p;
        }
        None
    }

    /// Parent/child pairs of the tree.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.children
            .iter()
            .flat_map(|(p, kids)| kids.iter().map(move |k| (p.as_str(), k.as_str())))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseModel {
    pub tables: Vec<TableDef>,
    pub constraints: Vec<FkConstraint>,
    pub m2m: Vec<M2MTriplet>,
    pub lookup: BTreeSet<String>,
    pub patterns: Vec<TreePattern>,
}

/// The role a table plays in the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Core,
    StarRoot,
    StarInner,
    SnowflakeRoot,
    SnowflakeInner,
    Lookup,
    M2mJoin,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Core => "core",
            Role::StarRoot => "star_root",
            Role::StarInner => "star_inner",
            Role::SnowflakeRoot => "snowflake_root",
            Role::SnowflakeInner => "snowflake_inner",
            Role::Lookup => "lookup",
            Role::M2mJoin => "m2m_join",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type RoleSet = BTreeSet<Role>;

impl DatabaseModel {
    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn table_mut(&mut self, name: &str) -> Option<&mut TableDef> {
        self.tables.iter_mut().find(|t| t.name == name)
    }

    pub fn has_table(&self, name: &str) -> bool {
        self.table(name).is_some()
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.iter().map(|t| t.name.as_str())
    }

    /// Case-insensitive table lookup returning the canonical name.
    pub fn resolve_table(&self, name: &str) -> Option<&str> {
        let name = name.trim();
        self.table(name).map(|t| t.name.as_str()).or_else(|| {
            self.tables
                .iter()
                .find(|t| t.name.eq_ignore_ascii_case(name))
                .map(|t| t.name.as_str())
        })
    }

    /// All constraints connecting `a` and `b`, in either direction.
    pub fn constraints_between<'a>(&'a self, a: &'a str, b: &'a str) -> impl Iterator<Item = &'a FkConstraint> + 'a {
        self.constraints.iter().filter(move |c| c.connects(a, b))
    }

    /// The pattern rooted at `t`, if any.
    pub fn pattern_rooted_at(&self, t: &str) -> Option<&TreePattern> {
        self.patterns.iter().find(|p| p.root == t)
    }

    /// The pattern in which `t` is an inner table, if any.
    pub fn pattern_containing_inner(&self, t: &str) -> Option<&TreePattern> {
        self.patterns.iter().find(|p| p.is_inner(t))
    }

    pub fn is_pattern_inner(&self, t: &str) -> bool {
        self.pattern_containing_inner(t).is_some()
    }

    pub fn is_core(&self, t: &str) -> bool {
        self.has_table(t) && !self.is_pattern_inner(t)
    }

    /// Core tables in declaration order.
    pub fn core_tables(&self) -> Vec<&str> {
        self.table_names().filter(|t| !self.is_pattern_inner(t)).collect()
    }

    pub fn is_m2m_join(&self, t: &str) -> bool {
        self.m2m.iter().any(|m| m.join_table == t)
    }

    pub fn classify_table(&self, t: &str) -> Result<RoleSet, ModelError> {
        if !self.has_table(t) {
            return Err(ModelError::UnknownTable(t.to_string()));
        }
        let mut roles = RoleSet::new();
        for p in &self.patterns {
            let (root_role, inner_role) = match p.kind {
                PatternKind::Star => (Role::StarRoot, Role::StarInner),
                PatternKind::Snowflake => (Role::SnowflakeRoot, Role::SnowflakeInner),
            };
            if p.root == t {
                roles.insert(root_role);
            }
            if p.is_inner(t) {
                roles.insert(inner_role);
            }
        }
        if !roles.contains(&Role::StarInner) && !roles.contains(&Role::SnowflakeInner) {
            roles.insert(Role::Core);
        }
        if self.lookup.contains(t) {
            roles.insert(Role::Lookup);
        }
        if self.is_m2m_join(t) {
            roles.insert(Role::M2mJoin);
        }
        Ok(roles)
    }

    /// Checks every structural invariant; an empty list means the model is
    /// well formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        validate_model(self)
    }

    /// A copy of the model restricted to `keep` tables. Constraints,
    /// triplets and lookups touching other tables are dropped; patterns are
    /// kept only when their root survives, pruned to surviving nodes.
    pub fn restricted_to(&self, keep: &BTreeSet<String>) -> DatabaseModel {
        let tables = self.tables.iter().filter(|t| keep.contains(&t.name)).cloned().collect();
        let constraints = self
            .constraints
            .iter()
            .filter(|c| keep.contains(&c.from_table) && keep.contains(&c.to_table))
            .cloned()
            .collect();
        let m2m = self
            .m2m
            .iter()
            .filter(|m| keep.contains(&m.left) && keep.contains(&m.right) && keep.contains(&m.join_table))
            .cloned()
            .collect();
        let lookup = self.lookup.iter().filter(|t| keep.contains(*t)).cloned().collect();
        let patterns = self
            .patterns
            .iter()
            .filter(|p| keep.contains(&p.root))
            .map(|p| {
                let mut q = TreePattern::new(p.kind, p.root.clone());
                for (parent, kids) in &p.children {
                    if !keep.contains(parent) {
                        continue;
                    }
                    let kids: Vec<String> = kids.iter().filter(|k| keep.contains(*k)).cloned().collect();
                    if !kids.is_empty() {
                        q.children.insert(parent.clone(), kids);
                    }
                }
                q
            })
            .collect();
        DatabaseModel {
            tables,
            constraints,
            m2m,
            lookup,
            patterns,
        }
    }
}

/// The invariant a diagnostic reports on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    EmptyName,
    DuplicateTable,
    DuplicateAttribute,
    EmptyPrimaryKey,
    PrimaryKeyNotAttribute,
    DanglingReference,
    UnknownColumn,
    KeyArity,
    M2mPairNotCovered,
    PatternNotTree,
    PatternEdgeNotCovered,
    InnerInTwoPatterns,
    LookupIsInner,
}

impl Rule {
    pub fn describe(self) -> &'static str {
        match self {
            Rule::EmptyName => "empty name",
            Rule::DuplicateTable => "duplicate table",
            Rule::DuplicateAttribute => "duplicate attribute",
            Rule::EmptyPrimaryKey => "empty primary key",
            Rule::PrimaryKeyNotAttribute => "primary key column is not an attribute",
            Rule::DanglingReference => "dangling reference",
            Rule::UnknownColumn => "unknown key column",
            Rule::KeyArity => "foreign key arity mismatch",
            Rule::M2mPairNotCovered => "m2m pair not covered by constraints",
            Rule::PatternNotTree => "pattern is not a rooted tree",
            Rule::PatternEdgeNotCovered => "pattern edge not covered by constraints",
            Rule::InnerInTwoPatterns => "table is inner in two patterns",
            Rule::LookupIsInner => "lookup table is a pattern inner table",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule: Rule,
    /// The offending entity, e.g. a table name or `Disp -> Client`.
    pub entity: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule.describe())
    }
}

pub fn validate_model(model: &DatabaseModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |rule: Rule, entity: String| out.push(Diagnostic { rule, entity });

    let mut seen_tables = BTreeSet::new();
    for t in &model.tables {
        if t.name.is_empty() {
            push(Rule::EmptyName, "<table>".into());
        }
        if !seen_tables.insert(t.name.as_str()) {
            push(Rule::DuplicateTable, t.name.clone());
        }
        let mut seen_attrs = BTreeSet::new();
        for a in &t.attributes {
            if a.name.is_empty() {
                push(Rule::EmptyName, format!("{}.<attribute>", t.name));
            }
            if !seen_attrs.insert(a.name.as_str()) {
                push(Rule::DuplicateAttribute, format!("{}.{}", t.name, a.name));
            }
        }
        if t.primary_key.is_empty() {
            push(Rule::EmptyPrimaryKey, t.name.clone());
        }
        for k in &t.primary_key {
            if !t.has_attribute(k) {
                push(Rule::PrimaryKeyNotAttribute, format!("{}.{}", t.name, k));
            }
        }
    }

    for c in &model.constraints {
        let entity = format!("{} -> {}", c.from_table, c.to_table);
        if c.fk_columns.is_empty() || c.fk_columns.len() != c.pk_columns.len() {
            push(Rule::KeyArity, entity.clone());
        }
        match (model.table(&c.from_table), model.table(&c.to_table)) {
            (Some(from), Some(to)) => {
                for col in &c.fk_columns {
                    if !from.has_attribute(col) {
                        push(Rule::UnknownColumn, format!("{}.{}", from.name, col));
                    }
                }
                for col in &c.pk_columns {
                    if !to.has_attribute(col) {
                        push(Rule::UnknownColumn, format!("{}.{}", to.name, col));
                    }
                }
            }
            _ => push(Rule::DanglingReference, entity),
        }
    }

    for m in &model.m2m {
        for t in [&m.left, &m.right, &m.join_table] {
            if !model.has_table(t) {
                push(Rule::DanglingReference, format!("m2m {}", t));
            }
        }
        for side in [&m.left, &m.right] {
            if model.constraints_between(side, &m.join_table).next().is_none() {
                push(Rule::M2mPairNotCovered, format!("{} -> {}", m.join_table, side));
            }
        }
    }

    for t in &model.lookup {
        if !model.has_table(t) {
            push(Rule::DanglingReference, format!("lookup {}", t));
        }
        if model.is_pattern_inner(t) {
            push(Rule::LookupIsInner, t.clone());
        }
    }

    let mut inner_owner: BTreeMap<&str, &str> = BTreeMap::new();
    for p in &model.patterns {
        if !model.has_table(&p.root) {
            push(Rule::DanglingReference, format!("pattern {}", p.root));
        }
        // Tree shape: every node reached once from the root, no node with
        // two parents, root without parent.
        let mut parents: BTreeMap<&str, usize> = BTreeMap::new();
        for (parent, child) in p.edges() {
            *parents.entry(child).or_default() += 1;
            if !model.has_table(parent) {
                push(Rule::DanglingReference, format!("pattern {} node {}", p.root, parent));
            }
            if !model.has_table(child) {
                push(Rule::DanglingReference, format!("pattern {} node {}", p.root, child));
            }
            if model.constraints_between(parent, child).next().is_none() {
                push(Rule::PatternEdgeNotCovered, format!("{} -> {}", parent, child));
            }
        }
        let reachable = p.bfs();
        let declared: BTreeSet<&str> = p
            .children
            .iter()
            .flat_map(|(k, v)| core::iter::once(k.as_str()).chain(v.iter().map(String::as_str)))
            .collect();
        if parents.contains_key(p.root.as_str())
            || parents.values().any(|&n| n > 1)
            || declared.iter().any(|n| !reachable.contains(n))
        {
            push(Rule::PatternNotTree, p.root.clone());
        }
        for inner in parents.keys() {
            if let Some(prev) = inner_owner.insert(inner, &p.root) {
                if prev != p.root {
                    push(Rule::InnerInTwoPatterns, (*inner).to_string());
                }
            }
        }
    }
    out
}
