//! Shared test helpers: a rule-based stand-in for the LLM used to record
//! the CDD transcripts, and hand-computed answers on the CDD seed.

#![allow(dead_code)]

use std::path::PathBuf;

use sqlweave::eval::DatasetItem;
use sqlweave::exec::SqliteExecutor;
use sqlweave::fixtures::cdd_dir;
use sqlweave_core::ddl::parse_ddl;
use sqlweave_core::metrics::{ResultSet, Value};
use sqlweave_core::model::DatabaseModel;
use sqlweave_core::{CompletionRequest, LlmClient, LlmError};

/// Answers element-selection prompts with the wanted names that appear in
/// the prompt's candidate list, and final-query prompts with a fixed mix
/// of completions cycled to the requested sample count.
pub struct RuleLlm {
    pub wanted: Vec<&'static str>,
    pub finals: Vec<String>,
}

fn candidates(prompt: &str) -> Vec<String> {
    let marker = "from the list [";
    let Some(start) = prompt.find(marker) else {
        return Vec::new();
    };
    let rest = &prompt[start + marker.len()..];
    let end = rest.find("]?").unwrap_or(rest.len());
    rest[..end]
        .split(", ")
        .map(|s| s.trim().trim_matches('\'').to_string())
        .collect()
}

impl LlmClient for RuleLlm {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        if req.prompt.contains("I created a view table") {
            return Ok((0..req.n_samples).map(|i| self.finals[i % self.finals.len()].clone()).collect());
        }
        let picked: Vec<String> = candidates(&req.prompt)
            .into_iter()
            .filter(|c| self.wanted.contains(&c.as_str()))
            .collect();
        let answer = format!("[{}]", picked.join(", "));
        Ok(vec![answer; req.n_samples])
    }
}

fn fenced(sql: &str) -> String {
    format!("```sql\n{sql}\n```")
}

/// Twenty completions: `right` in two spellings that normalize alike,
/// plus `wrong` answers and one answer without SQL.
fn mix(right_upper: &str, right_lower: &str, wrong: &[&str]) -> Vec<String> {
    let mut v = Vec::new();
    for i in 0..(19 - wrong.len()) {
        v.push(if i % 3 == 2 {
            fenced(right_lower)
        } else {
            format!("Here is the query:\n{}", fenced(right_upper))
        });
    }
    v.extend(wrong.iter().map(|w| fenced(w)));
    v.push("The view does not contain enough information.".to_string());
    v
}

pub const QUESTIONS: [&str; 3] = [
    "List customers who use datacenters with names starting with 'dev'. Output clients and datacenters names",
    "List resource pool names with CPU overhead limit greater than runtime overall usage by 100",
    "What are the total tax payments, which is the sum of Tax and Supercharge?",
];

pub fn cdd_rules(q: usize) -> RuleLlm {
    match q {
        1 => RuleLlm {
            wanted: vec!["client", "datacenter", "name", "gender"],
            finals: mix(
                "SELECT client_name, datacenter_name FROM v WHERE datacenter_name LIKE 'dev%';",
                "select client_name, datacenter_name\nfrom v\nwhere datacenter_name like 'dev%'",
                &["select client_name, datacenter_name from v"],
            ),
        },
        2 => RuleLlm {
            wanted: vec![
                "resource_pool",
                "name",
                "config",
                "runtime",
                "configcpu",
                "runtimecpu",
                "overheadLimit",
                "overallUsage",
            ],
            finals: mix(
                "SELECT DISTINCT resource_pool_name FROM v WHERE configcpu_overheadlimit > runtimecpu_overallusage + 100",
                "select distinct resource_pool_name\nfrom v\nwhere configcpu_overheadlimit > runtimecpu_overallusage + 100;",
                &[
                    "select resource_pool_name from v where configcpu_overheadlimit > runtimecpu_overallusage",
                    "select resource_pool_name from v where configcpu_overheadlimit > runtimecpu_overallusage",
                ],
            ),
        },
        3 => RuleLlm {
            wanted: vec!["payment", "payment_amount", "amount", "tax", "supercharge", "pama_id"],
            finals: mix(
                "SELECT SUM(IFNULL(payment_amount_amount, 0)) + SUM(IFNULL(payment_amount_amount_2, 0)) FROM v",
                "select sum(ifnull(payment_amount_amount, 0)) + sum(ifnull(payment_amount_amount_2, 0))\nfrom v",
                &["select sum(payment_amount_amount) from v"],
            ),
        },
        _ => panic!("no question {q}"),
    }
}

pub fn transcript_path(q: usize) -> PathBuf {
    cdd_dir().join("transcripts").join(format!("q{q}.json"))
}

pub fn golden_path(q: usize, part: &str) -> PathBuf {
    cdd_dir().join("golden").join(format!("q{q}.{part}.sql"))
}

fn t(s: &str) -> Value {
    Value::Text(s.to_string())
}

/// Results of the ground-truth SQL on the seed, worked out by hand.
pub fn oracle(q: usize) -> ResultSet {
    match q {
        // rp-alpha and rp-delta sit on dev-east and both serve Alice;
        // rp-gamma sits on dev-west and serves Carol.
        1 => ResultSet::new(
            vec!["name".into(), "name".into()],
            vec![
                vec![t("Alice"), t("dev-east")],
                vec![t("Alice"), t("dev-east")],
                vec![t("Carol"), t("dev-west")],
            ],
        ),
        // 500 > 300 + 100 and 460 > 350 + 100; rp-beta fails, rp-delta has
        // no configuration.
        2 => ResultSet::new(vec!["name".into()], vec![vec![t("rp-alpha")], vec![t("rp-gamma")]]),
        // Each payment's amounts pair with each other amount of the same
        // payment: 2*(100+20)*2 + 2*(50+30)*2 + 2*10 = 480 + 320 + 20.
        3 => ResultSet::new(vec!["total".into()], vec![vec![Value::Int(820)]]),
        _ => panic!("no question {q}"),
    }
}

pub fn results_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join("results")
}

/// Candidate CSV file against `gt.csv`, with the expected EX and ESX.
pub const METRIC_CASES: [(&str, bool, bool); 8] = [
    ("same.csv", true, true),
    ("swapped.csv", true, true),
    ("real_and_null.csv", true, true),
    ("extra_column.csv", false, true),
    ("extra_row.csv", false, false),
    ("duplicate_row.csv", false, false),
    ("missing_column.csv", false, false),
    ("wrong_value.csv", false, false),
];

/// Selects every offered element; final queries come from a per-question
/// list of (sql, copies) cycled over the samples.
pub struct Synthetic {
    pub finals: Vec<(&'static str, Vec<(&'static str, usize)>)>,
}

impl LlmClient for Synthetic {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, LlmError> {
        if req.prompt.contains("I created a view table") {
            let (_, mix) = self
                .finals
                .iter()
                .find(|(q, _)| req.prompt.contains(q))
                .expect("known question");
            let mut out: Vec<String> = mix
                .iter()
                .flat_map(|(sql, k)| std::iter::repeat(format!("```sql\n{sql}\n```")).take(*k))
                .collect();
            out.truncate(req.n_samples);
            while out.len() < req.n_samples {
                out.push("no idea".into());
            }
            return Ok(out);
        }
        let start = req.prompt.find("from the list [").unwrap() + "from the list [".len();
        let end = req.prompt[start..].find("]?").unwrap() + start;
        Ok(vec![format!("[{}]", &req.prompt[start..end]); req.n_samples])
    }
}

pub fn protocol_fixture() -> (DatabaseModel, SqliteExecutor, Vec<DatasetItem>, Synthetic) {
    let model = parse_ddl("create table t (id int, val int, primary key (id));").unwrap();
    let ex = SqliteExecutor::new(&model, "insert into t values (1, 10), (2, 20), (3, 30);");
    let item = |q: &str, gt: &str| DatasetItem {
        question: q.into(),
        evidence: None,
        gt_sql: gt.into(),
    };
    let dataset = vec![
        item("all values", "select val from t"),
        item("largest value", "select max(val) from t"),
        item("value count", "select count(val) from t"),
    ];
    let llm = Synthetic {
        finals: vec![
            ("all values", vec![("select t_val from v", 20)]),
            // Exactly six of twenty match: just over the threshold.
            ("largest value", vec![("select max(t_val) from v", 6), ("select min(t_val) from v", 14)]),
            // Five matches is not more than five.
            ("value count", vec![("select count(t_val) from v", 5), ("select 0 from v", 15)]),
        ],
    };
    (model, ex, dataset, llm)
}
