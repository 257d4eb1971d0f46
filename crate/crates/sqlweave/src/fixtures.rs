//! The cloud datacenter deployment (CDD) example database: schema, model
//! annotations, seed rows and three questions with ground-truth SQL.

use std::path::PathBuf;

use sqlweave_core::model::DatabaseModel;

use crate::dbm::{load_dbm_onto, DbmDocument};
use crate::error::Error;
use crate::eval::{parse_dataset, DatasetItem};

pub const CDD_SCHEMA: &str = include_str!("../fixtures/cdd/schema.sql");
pub const CDD_SEED: &str = include_str!("../fixtures/cdd/seed.sql");
pub const CDD_QUESTIONS: &str = include_str!("../fixtures/cdd/questions.jsonl");

const CDD_DBM: [(&str, &str); 5] = [
    ("lookup.json", include_str!("../fixtures/cdd/dbm/lookup.json")),
    ("payment.json", include_str!("../fixtures/cdd/dbm/payment.json")),
    ("relationships.json", include_str!("../fixtures/cdd/dbm/relationships.json")),
    ("resource_pool.json", include_str!("../fixtures/cdd/dbm/resource_pool.json")),
    ("retention_strategy.json", include_str!("../fixtures/cdd/dbm/retention_strategy.json")),
];

/// Directory holding the CDD files on disk (for the CLI and tests).
pub fn cdd_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("cdd")
}

#[derive(Clone, Debug)]
pub struct CddFixture {
    pub model: DatabaseModel,
    pub seed: &'static str,
    pub questions: Vec<DatasetItem>,
}

pub fn cdd_model() -> Result<DatabaseModel, Error> {
    let base = sqlweave_core::ddl::parse_ddl(CDD_SCHEMA).map_err(|source| Error::Ddl {
        path: cdd_dir().join("schema.sql"),
        source,
    })?;
    let docs = CDD_DBM
        .iter()
        .map(|(name, text)| {
            let path = cdd_dir().join("dbm").join(name);
            let value = serde_json::from_str(text).map_err(|e| Error::json(&path, e))?;
            Ok(DbmDocument::new(path, value))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    load_dbm_onto(base, &docs)
}

pub fn load_cdd() -> Result<CddFixture, Error> {
    Ok(CddFixture {
        model: cdd_model()?,
        seed: CDD_SEED,
        questions: parse_dataset(CDD_QUESTIONS).map_err(|(line, e)| Error::Json {
            path: cdd_dir().join(format!("questions.jsonl:{line}")),
            source: e,
        })?,
    })
}
