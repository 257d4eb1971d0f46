//! Database model documents in JSON.
//!
//! A DBM directory holds any mix of:
//!
//! * index documents mapping names to entries: table entries
//!   (`"primary"`, `"path"`, `"path_to_types"`, or inline `"attributes"`)
//!   and relationship entries (`"type": "Relationships"` with
//!   `"sqlrelation"` of `M:1`, `1:1` or `M:M`),
//! * description documents (`"NameField"`, `"DescriptionField"`, then one
//!   description per attribute),
//! * types documents (attribute → `{"type", "default"}`), usually
//!   referenced from a table entry,
//! * pattern documents (`"NameField"` naming the root, optional
//!   `"pattern": "star" | "snowflake"`, children as nested objects or
//!   arrays),
//! * lookup documents (`{"lookup": [...]}`).
//!
//! Documents are read in file-name order; attributes described by a
//! document come out sorted by name. Unknown keys are logged and
//! skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use sqlweave_core::model::{AttributeDef, Cardinality, DatabaseModel, FkConstraint, M2MTriplet, PatternKind, TableDef, TreePattern};

use crate::error::Error;

/// One JSON document and where it came from (for error messages and
/// resolving relative `path` entries).
#[derive(Clone, Debug)]
pub struct DbmDocument {
    pub path: PathBuf,
    pub value: Value,
}

impl DbmDocument {
    pub fn new(path: impl Into<PathBuf>, value: Value) -> Self {
        DbmDocument {
            path: path.into(),
            value,
        }
    }
}

pub fn read_dbm_dir(dir: &Path) -> Result<Vec<DbmDocument>, Error> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "json").unwrap_or(false))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let value = serde_json::from_str(&text).map_err(|e| Error::json(&p, e))?;
            Ok(DbmDocument::new(p, value))
        })
        .collect()
}

#[derive(Default)]
struct Loader {
    tables: Vec<TableDef>,
    constraints: Vec<FkConstraint>,
    m2m: Vec<M2MTriplet>,
    lookup: BTreeSet<String>,
    patterns: Vec<TreePattern>,
    /// Documents already consumed through a table entry's `path`.
    consumed: BTreeSet<PathBuf>,
}

fn str_list(v: &Value) -> Option<Vec<String>> {
    match v {
        Value::Array(items) => items.iter().map(|i| i.as_str().map(str::to_string)).collect(),
        Value::String(s) => Some(vec![s.clone()]),
        _ => None,
    }
}

fn canonical(p: &Path) -> PathBuf {
    p.canonicalize().unwrap_or_else(|_| p.to_path_buf())
}

impl Loader {
    fn table_mut(&mut self, name: &str) -> &mut TableDef {
        if let Some(i) = self.tables.iter().position(|t| t.name == name) {
            return &mut self.tables[i];
        }
        self.tables.push(TableDef::new(name));
        self.tables.last_mut().expect("just pushed")
    }

    fn attr_mut<'t>(t: &'t mut TableDef, name: &str) -> &'t mut AttributeDef {
        if let Some(i) = t.attribute_index(name) {
            return &mut t.attributes[i];
        }
        t.attributes.push(AttributeDef::new(name, ""));
        t.attributes.last_mut().expect("just pushed")
    }

    fn document(&mut self, doc: &DbmDocument, all: &[DbmDocument]) -> Result<(), Error> {
        if self.consumed.contains(&canonical(&doc.path)) {
            return Ok(());
        }
        let Value::Object(obj) = &doc.value else {
            return Err(Error::dbm(&doc.path, "expected a JSON object"));
        };
        if let Some(l) = obj.get("lookup") {
            let names = str_list(l).ok_or_else(|| Error::dbm(&doc.path, "`lookup` must be a list of table names"))?;
            self.lookup.extend(names);
            return Ok(());
        }
        match obj.get("NameField") {
            Some(Value::String(name)) => {
                let is_pattern = obj.contains_key("pattern")
                    || obj
                        .iter()
                        .any(|(k, v)| k != "NameField" && (v.is_object() || v.is_array() || v.is_null()));
                if is_pattern {
                    self.pattern(doc, name, obj)
                } else {
                    self.descriptions(name, obj);
                    Ok(())
                }
            }
            Some(Value::Object(_)) => {
                log::warn!("{}: types document not referenced by any table entry; skipped", doc.path.display());
                Ok(())
            }
            Some(_) => Err(Error::dbm(&doc.path, "`NameField` must be a string")),
            None => self.index(doc, obj, all),
        }
    }

    fn descriptions(&mut self, table: &str, obj: &Map<String, Value>) {
        let t = self.table_mut(table);
        for (k, v) in obj {
            let Some(text) = v.as_str() else { continue };
            match k.as_str() {
                "NameField" => {}
                "DescriptionField" => t.description = text.trim().to_string(),
                attr => Self::attr_mut(t, attr).description = text.trim().to_string(),
            }
        }
    }

    fn types(&mut self, table: &str, doc: &DbmDocument) -> Result<(), Error> {
        let Value::Object(obj) = &doc.value else {
            return Err(Error::dbm(&doc.path, "types document must be an object"));
        };
        let t = self.table_mut(table);
        for (k, v) in obj {
            if k == "NameField" || k == "DescriptionField" {
                continue;
            }
            let a = Self::attr_mut(t, k);
            if let Some(ty) = v.get("type").and_then(Value::as_str) {
                a.sql_type = ty.to_string();
            }
            if let Some(d) = v.get("default").and_then(Value::as_str) {
                a.nullability_default = d.to_string();
            }
        }
        Ok(())
    }

    fn referenced(&mut self, base: &Path, target: &str, all: &[DbmDocument]) -> Result<DbmDocument, Error> {
        let p = Path::new(target);
        let resolved = if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.parent().unwrap_or(Path::new(".")).join(p)
        };
        self.consumed.insert(canonical(&resolved));
        if let Some(d) = all.iter().find(|d| canonical(&d.path) == canonical(&resolved)) {
            return Ok(d.clone());
        }
        let text = fs::read_to_string(&resolved).map_err(|e| Error::io(&resolved, e))?;
        let value = serde_json::from_str(&text).map_err(|e| Error::json(&resolved, e))?;
        Ok(DbmDocument::new(resolved, value))
    }

    fn index(&mut self, doc: &DbmDocument, obj: &Map<String, Value>, all: &[DbmDocument]) -> Result<(), Error> {
        for (key, entry) in obj {
            let Value::Object(e) = entry else {
                log::warn!("{}: entry `{key}` is not an object; skipped", doc.path.display());
                continue;
            };
            if e.get("type").and_then(Value::as_str) == Some("Relationships") || e.contains_key("sqlrelation") {
                self.relationship(doc, key, e)?;
            } else {
                self.table_entry(doc, key, e, all)?;
            }
        }
        Ok(())
    }

    fn table_entry(&mut self, doc: &DbmDocument, name: &str, e: &Map<String, Value>, all: &[DbmDocument]) -> Result<(), Error> {
        self.table_mut(name);
        for (k, v) in e {
            match k.as_str() {
                "type" => {}
                "primary" => {
                    let pk = str_list(v).ok_or_else(|| Error::dbm(&doc.path, format!("`{name}.primary` must list columns")))?;
                    let t = self.table_mut(name);
                    for c in &pk {
                        Self::attr_mut(t, c);
                    }
                    t.primary_key = pk;
                }
                "path" => {
                    let target = v.as_str().ok_or_else(|| Error::dbm(&doc.path, "`path` must be a string"))?;
                    let d = self.referenced(&doc.path, target, all)?;
                    let Value::Object(o) = &d.value else {
                        return Err(Error::dbm(&d.path, "description document must be an object"));
                    };
                    self.descriptions(name, o);
                }
                "path_to_types" => {
                    let target = v.as_str().ok_or_else(|| Error::dbm(&doc.path, "`path_to_types` must be a string"))?;
                    if !target.is_empty() {
                        let d = self.referenced(&doc.path, target, all)?;
                        self.types(name, &d)?;
                    }
                }
                "DescriptionField" | "description" => {
                    if let Some(s) = v.as_str() {
                        self.table_mut(name).description = s.trim().to_string();
                    }
                }
                "attributes" => {
                    let Value::Object(attrs) = v else {
                        return Err(Error::dbm(&doc.path, format!("`{name}.attributes` must be an object")));
                    };
                    let t = self.table_mut(name);
                    for (an, av) in attrs {
                        let a = Self::attr_mut(t, an);
                        match av {
                            Value::String(s) => a.sql_type = s.clone(),
                            Value::Object(o) => {
                                if let Some(s) = o.get("type").and_then(Value::as_str) {
                                    a.sql_type = s.to_string();
                                }
                                if let Some(s) = o.get("default").and_then(Value::as_str) {
                                    a.nullability_default = s.to_string();
                                }
                                if let Some(s) = o.get("description").and_then(Value::as_str) {
                                    a.description = s.to_string();
                                }
                            }
                            _ => {}
                        }
                    }
                }
                other => log::warn!("{}: unknown key `{other}` in table `{name}`", doc.path.display()),
            }
        }
        Ok(())
    }

    fn relationship(&mut self, doc: &DbmDocument, key: &str, e: &Map<String, Value>) -> Result<(), Error> {
        let kind = e
            .get("sqlrelation")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::dbm(&doc.path, format!("relationship `{key}` lacks `sqlrelation`")))?;
        let sides: Vec<String> = key.split(',').map(|s| s.trim().to_string()).collect();
        match kind {
            "M:1" | "1:1" => {
                let fr = e
                    .get("foreign_relation")
                    .and_then(Value::as_object)
                    .ok_or_else(|| Error::dbm(&doc.path, format!("relationship `{key}` lacks `foreign_relation`")))?;
                let fk = fr
                    .get("FOREIGN")
                    .and_then(str_list)
                    .ok_or_else(|| Error::dbm(&doc.path, format!("`{key}`: missing `FOREIGN`")))?;
                let to = fr
                    .get("foreign_relation_ref_table")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::dbm(&doc.path, format!("`{key}`: missing `foreign_relation_ref_table`")))?
                    .to_string();
                let pk = fr
                    .get("foreign_relation_ref_table_keys")
                    .and_then(str_list)
                    .ok_or_else(|| Error::dbm(&doc.path, format!("`{key}`: missing `foreign_relation_ref_table_keys`")))?;
                let from = sides
                    .iter()
                    .find(|s| **s != to)
                    .cloned()
                    .unwrap_or_else(|| to.clone());
                let c = FkConstraint {
                    from_table: from,
                    fk_columns: fk,
                    to_table: to,
                    pk_columns: pk,
                    kind: if kind == "1:1" {
                        Cardinality::OneToOne
                    } else {
                        Cardinality::ManyToOne
                    },
                };
                if !self.constraints.contains(&c) {
                    self.constraints.push(c);
                }
            }
            "M:M" => {
                let m = e
                    .get("m2m_relation")
                    .and_then(Value::as_object)
                    .ok_or_else(|| Error::dbm(&doc.path, format!("relationship `{key}` lacks `m2m_relation`")))?;
                let join = m
                    .get("m2m_middle_table")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::dbm(&doc.path, format!("`{key}`: missing `m2m_middle_table`")))?;
                let sides = m
                    .get("m2m_side_tables")
                    .and_then(str_list)
                    .filter(|s| s.len() == 2)
                    .ok_or_else(|| Error::dbm(&doc.path, format!("`{key}`: `m2m_side_tables` must name two tables")))?;
                let t = M2MTriplet::new(sides[0].clone(), sides[1].clone(), join);
                if !self.m2m.contains(&t) {
                    self.m2m.push(t);
                }
            }
            other => {
                return Err(Error::dbm(&doc.path, format!("relationship `{key}`: unknown sqlrelation `{other}`")));
            }
        }
        Ok(())
    }

    fn pattern(&mut self, doc: &DbmDocument, root: &str, obj: &Map<String, Value>) -> Result<(), Error> {
        let declared = match obj.get("pattern").map(|v| v.as_str()) {
            None => None,
            Some(Some(s)) if s.eq_ignore_ascii_case("star") => Some(PatternKind::Star),
            Some(Some(s)) if s.eq_ignore_ascii_case("snowflake") => Some(PatternKind::Snowflake),
            Some(_) => return Err(Error::dbm(&doc.path, "`pattern` must be `star` or `snowflake`")),
        };
        let mut p = TreePattern::new(PatternKind::Star, root);
        let mut depth = 1;
        for (k, v) in obj {
            if k == "NameField" || k == "pattern" || k == "DescriptionField" {
                continue;
            }
            p.children.entry(root.to_string()).or_default().push(k.clone());
            depth = depth.max(1 + add_subtree(&mut p, k, v, &doc.path)?);
        }
        p.kind = declared.unwrap_or(if depth > 1 {
            PatternKind::Snowflake
        } else {
            PatternKind::Star
        });
        self.patterns.push(p);
        Ok(())
    }
}

/// Adds the children described by `v` under `node`; returns the subtree
/// depth below `node`.
fn add_subtree(p: &mut TreePattern, node: &str, v: &Value, path: &Path) -> Result<usize, Error> {
    let mut depth = 0;
    match v {
        Value::Null => {}
        Value::String(s) if s.is_empty() => {}
        Value::String(s) => {
            p.children.entry(node.to_string()).or_default().push(s.clone());
            depth = 1;
        }
        Value::Array(items) => {
            for item in items {
                match item {
                    Value::String(s) => {
                        p.children.entry(node.to_string()).or_default().push(s.clone());
                        depth = depth.max(1);
                    }
                    Value::Object(o) => {
                        for (k, sub) in o {
                            p.children.entry(node.to_string()).or_default().push(k.clone());
                            depth = depth.max(1 + add_subtree(p, k, sub, path)?);
                        }
                    }
                    _ => return Err(Error::dbm(path, format!("bad child entry under `{node}`"))),
                }
            }
        }
        Value::Object(o) => {
            for (k, sub) in o {
                p.children.entry(node.to_string()).or_default().push(k.clone());
                depth = depth.max(1 + add_subtree(p, k, sub, path)?);
            }
        }
        _ => return Err(Error::dbm(path, format!("bad child entry under `{node}`"))),
    }
    Ok(depth)
}

/// Resolves pattern, lookup and triplet names case-insensitively against
/// the model's tables.
fn resolve_names(m: &mut DatabaseModel) {
    let names: Vec<String> = m.tables.iter().map(|t| t.name.clone()).collect();
    let fix = |s: &str| -> String {
        names
            .iter()
            .find(|n| n.as_str() == s)
            .or_else(|| names.iter().find(|n| n.eq_ignore_ascii_case(s)))
            .cloned()
            .unwrap_or_else(|| s.to_string())
    };
    for p in &mut m.patterns {
        p.root = fix(&p.root);
        let children: BTreeMap<String, Vec<String>> = std::mem::take(&mut p.children)
            .into_iter()
            .map(|(k, v)| (fix(&k), v.iter().map(|c| fix(c)).collect()))
            .collect();
        p.children = children;
    }
    m.lookup = m.lookup.iter().map(|t| fix(t)).collect();
    for t in &mut m.m2m {
        t.left = fix(&t.left);
        t.right = fix(&t.right);
        t.join_table = fix(&t.join_table);
    }
    for c in &mut m.constraints {
        c.from_table = fix(&c.from_table);
        c.to_table = fix(&c.to_table);
    }
}

/// Builds a model from DBM documents, on top of `base` (typically parsed
/// from DDL). Tables and constraints from both are merged; DBM documents
/// fill in descriptions and types.
pub fn load_dbm_onto(base: DatabaseModel, docs: &[DbmDocument]) -> Result<DatabaseModel, Error> {
    let mut l = Loader {
        tables: base.tables,
        constraints: base.constraints,
        m2m: base.m2m,
        lookup: base.lookup,
        patterns: base.patterns,
        consumed: BTreeSet::new(),
    };
    // Referenced documents first, so they are not also read standalone.
    for doc in docs {
        if let Value::Object(obj) = &doc.value {
            if !obj.contains_key("NameField") && !obj.contains_key("lookup") {
                l.document(doc, docs)?;
            }
        }
    }
    for doc in docs {
        if let Value::Object(obj) = &doc.value {
            if obj.contains_key("NameField") || obj.contains_key("lookup") {
                l.document(doc, docs)?;
            }
        } else {
            return Err(Error::dbm(&doc.path, "expected a JSON object"));
        }
    }
    let mut m = DatabaseModel {
        tables: l.tables,
        constraints: l.constraints,
        m2m: l.m2m,
        lookup: l.lookup,
        patterns: l.patterns,
    };
    resolve_names(&mut m);
    Ok(m)
}

pub fn load_dbm(docs: &[DbmDocument]) -> Result<DatabaseModel, Error> {
    load_dbm_onto(DatabaseModel::default(), docs)
}

/// Reads an optional DDL file and an optional DBM directory into one model.
pub fn load_model(ddl: Option<&Path>, dbm_dir: Option<&Path>) -> Result<DatabaseModel, Error> {
    let base = match ddl {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            sqlweave_core::ddl::parse_ddl(&text).map_err(|source| Error::Ddl {
                path: p.to_path_buf(),
                source,
            })?
        }
        None => DatabaseModel::default(),
    };
    match dbm_dir {
        Some(d) => load_dbm_onto(base, &read_dbm_dir(d)?),
        None => Ok(base),
    }
}
