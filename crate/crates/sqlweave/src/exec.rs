//! SQL execution against an in-memory SQLite database.

use rusqlite::types::ValueRef;
use rusqlite::Connection;
use sqlweave_core::metrics::{ResultSet, Value};
use sqlweave_core::model::DatabaseModel;

use crate::error::Error;

/// A connection that runs statements and returns result sets.
pub trait Session {
    /// Runs statements that return no rows (DDL, inserts, `create view`).
    fn execute_batch(&mut self, sql: &str) -> Result<(), Error>;
    fn query(&mut self, sql: &str) -> Result<ResultSet, Error>;
}

/// Hands out independent sessions, one per question.
pub trait Executor: Sync {
    fn session(&self) -> Result<Box<dyn Session>, Error>;
}

/// `CREATE TABLE` statements SQLite accepts: column types and primary keys
/// only, without comments or foreign keys.
pub fn sqlite_ddl(model: &DatabaseModel) -> String {
    let mut out = String::new();
    for t in &model.tables {
        let mut items: Vec<String> = t
            .attributes
            .iter()
            .map(|a| {
                let ty = if a.sql_type.is_empty() { "TEXT" } else { a.sql_type.as_str() };
                format!("  \"{}\" {}", a.name, ty)
            })
            .collect();
        if !t.primary_key.is_empty() {
            let cols: Vec<String> = t.primary_key.iter().map(|c| format!("\"{c}\"")).collect();
            items.push(format!("  PRIMARY KEY ({})", cols.join(", ")));
        }
        out.push_str(&format!("CREATE TABLE \"{}\" (\n{}\n);\n", t.name, items.join(",\n")));
    }
    out
}

pub struct SqliteSession {
    conn: Connection,
}

impl SqliteSession {
    pub fn open_in_memory() -> Result<Self, Error> {
        let conn = Connection::open_in_memory().map_err(sql_err)?;
        Ok(SqliteSession { conn })
    }
}

fn sql_err(e: rusqlite::Error) -> Error {
    Error::Sql(e.to_string())
}

fn to_value(v: ValueRef<'_>) -> Value {
    match v {
        ValueRef::Null => Value::Null,
        ValueRef::Integer(i) => Value::Int(i),
        ValueRef::Real(r) => Value::Real(r),
        ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Value::Text(hex::encode(b)),
    }
}

impl Session for SqliteSession {
    fn execute_batch(&mut self, sql: &str) -> Result<(), Error> {
        self.conn.execute_batch(sql).map_err(sql_err)
    }

    fn query(&mut self, sql: &str) -> Result<ResultSet, Error> {
        let mut stmt = self.conn.prepare(sql).map_err(sql_err)?;
        let columns: Vec<String> = stmt.column_names().into_iter().map(str::to_string).collect();
        let n = columns.len();
        let mut rows = Vec::new();
        let mut it = stmt.query([]).map_err(sql_err)?;
        while let Some(r) = it.next().map_err(sql_err)? {
            let mut row = Vec::with_capacity(n);
            for i in 0..n {
                row.push(to_value(r.get_ref(i).map_err(sql_err)?));
            }
            rows.push(row);
        }
        Ok(ResultSet::new(columns, rows))
    }
}

/// Builds a fresh in-memory database from a model and a seed script for
/// every session.
#[derive(Clone, Debug)]
pub struct SqliteExecutor {
    setup: String,
}

impl SqliteExecutor {
    pub fn new(model: &DatabaseModel, seed_sql: &str) -> Self {
        SqliteExecutor {
            setup: format!("{}\n{}", sqlite_ddl(model), seed_sql),
        }
    }
}

impl Executor for SqliteExecutor {
    fn session(&self) -> Result<Box<dyn Session>, Error> {
        let mut s = SqliteSession::open_in_memory()?;
        s.execute_batch(&self.setup)?;
        Ok(Box::new(s))
    }
}
