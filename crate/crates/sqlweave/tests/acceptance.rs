//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the lines always show.

mod common;
#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqlweave::cli;
use sqlweave::eval::{load_result_csv, run_benchmark, BenchmarkReport, Protocol};
use sqlweave::exec::{Executor, SqliteExecutor};
use sqlweave::fixtures::load_cdd;
use sqlweave_core::metrics::{coverage, execution_match, subset_match, ResultSet, SqlFootprint, Value};
use sqlweave_core::pipeline::PipelineSettings;
use sqlweave_core::solver::{check_walk, decompose_solve, formulate_csp, solve_path, ConstraintId, SolveError, Walk};
use sqlweave_core::view::{emit_view_sql, plan_view, JoinKind, ViewPlan};
use sqlweave_core::RelevanceSet;

const SOLVE_BUDGET: Duration = Duration::from_secs(1);
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const ORACLE_PROBLEMS: usize = 200;
const IMPLICATION_PAIRS: usize = 100;
const COVERAGE_TOLERANCE: f64 = 1e-12;

type Check = Result<String, String>;
type Column = (String, usize, String);
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn relevance(tables: &[&str]) -> RelevanceSet {
    let mut r = RelevanceSet::new();
    for t in tables {
        r.insert_table(t);
    }
    r
}

/// One join as written in SQL: kind, joined table, the name it is
/// referred to by, and its `a.x = b.y` pairs with names resolved to
/// occurrence numbers of their tables.
#[derive(Debug, PartialEq, Eq, PartialOrd, Ord, Clone)]
struct JoinShape {
    kind: JoinKind,
    table: String,
    occurrence: usize,
    on: BTreeSet<(Column, Column)>,
}

/// Join list of a `from ... join ...` text, read token by token.
fn joins_of_sql(sql: &str) -> Vec<JoinShape> {
    let text = sql.replace('\n', " ");
    let lower = text.to_lowercase();
    let from = lower.find(" from ").expect("from clause") + " from ".len();
    let rest = &text[from..];
    let end = rest.to_lowercase().find(" where ").unwrap_or(rest.len());
    let toks: Vec<&str> = rest[..end].split_whitespace().collect();
    // name used in SQL -> (table, occurrence)
    let mut names: Vec<(String, (String, usize))> = Vec::new();
    let mut counts: Vec<(String, usize)> = Vec::new();
    let mut bind = |table: &str, alias: &str, names: &mut Vec<(String, (String, usize))>| -> usize {
        let k = match counts.iter_mut().find(|(t, _)| t == table) {
            Some((_, n)) => {
                *n += 1;
                *n
            }
            None => {
                counts.push((table.to_string(), 1));
                1
            }
        };
        names.push((alias.to_string(), (table.to_string(), k)));
        k
    };
    let mut i = 0;
    let base = toks[0];
    i += 1;
    let base_alias = if toks.get(i).map(|t| t.eq_ignore_ascii_case("as")) == Some(true) {
        i += 2;
        toks[i - 1]
    } else {
        base
    };
    bind(base, base_alias, &mut names);
    let mut out = Vec::new();
    while i < toks.len() {
        let kind = if toks[i].eq_ignore_ascii_case("left") {
            i += 1;
            JoinKind::Left
        } else {
            JoinKind::Inner
        };
        assert!(toks[i].eq_ignore_ascii_case("join"), "unexpected token {}", toks[i]);
        let table = toks[i + 1];
        i += 2;
        let alias = if toks[i].eq_ignore_ascii_case("as") {
            i += 2;
            toks[i - 1]
        } else {
            table
        };
        let occurrence = bind(table, alias, &mut names);
        assert!(toks[i].eq_ignore_ascii_case("on"));
        i += 1;
        let mut on = BTreeSet::new();
        loop {
            let resolve = |c: &str| {
                let (n, col) = c.split_once('.').expect("qualified column");
                let (t, k) = names.iter().rev().find(|(a, _)| a == n).expect("known name").1.clone();
                (t, k, col.to_lowercase())
            };
            let (a, b) = (resolve(toks[i]), resolve(toks[i + 2]));
            on.insert(if a <= b { (a, b) } else { (b, a) });
            i += 3;
            if i < toks.len() && toks[i].eq_ignore_ascii_case("and") {
                i += 1;
            } else {
                break;
            }
        }
        out.push(JoinShape {
            kind,
            table: table.to_string(),
            occurrence,
            on,
        });
    }
    out
}

fn joins_of_plan(vp: &ViewPlan) -> Vec<JoinShape> {
    vp.joins
        .iter()
        .map(|j| JoinShape {
            kind: j.kind,
            table: j.target.table.clone(),
            occurrence: j.target.index,
            on: j
                .on
                .iter()
                .map(|(p, f)| {
                    let a = (p.occ.table.clone(), p.occ.index, p.column.to_lowercase());
                    let b = (f.occ.table.clone(), f.occ.index, f.column.to_lowercase());
                    if a <= b {
                        (a, b)
                    } else {
                        (b, a)
                    }
                })
                .collect(),
        })
        .collect()
}

fn sorted(mut v: Vec<JoinShape>) -> Vec<JoinShape> {
    v.sort();
    v
}

fn c1_green_path() -> Check {
    let m = load_cdd().map_err(|e| e.to_string())?.model;
    let p = formulate_csp(&relevance(&["client", "datacenter"]), &m, None).map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let w = solve_path(&p).map_err(|e| e.to_string())?;
    let took = t0.elapsed();
    let want = ["datacenter", "compute_resource", "resource_pool", "res_to_client", "client"];
    ensure(w.tables() == want, format!("walk {w}"))?;
    ensure(check_walk(&w, &p).is_ok(), format!("{:?}", check_walk(&w, &p)))?;
    ensure(took < SOLVE_BUDGET, format!("took {took:?}"))?;
    Ok(format!("walk {w} cost {} in {took:?}", w.cost))
}

fn c2_lookup_rejection() -> Check {
    let m = load_cdd().map_err(|e| e.to_string())?.model;
    let p = formulate_csp(&relevance(&["client", "datacenter"]), &m, None).map_err(|e| e.to_string())?;
    let red = Walk::from_tables(&["datacenter", "location", "client"], &p.graph, &p.targets);
    let v = check_walk(&red, &p).err().unwrap_or_default();
    ensure(v.iter().any(|v| v.constraint == ConstraintId::C4), format!("violations {v:?}"))?;
    for n in 3..=10 {
        match solve_path(&p.clone().with_max_len(n)) {
            Ok(w) => ensure(w.tables() != red.tables(), format!("returned the red path at max_len {n}"))?,
            Err(SolveError::Infeasible { .. }) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok("red path flagged C4 and never returned for max_len 3..=10".into())
}

fn q_relevance(q: usize) -> RelevanceSet {
    match q {
        2 => RelevanceSet::from_entries(&[
            ("resource_pool", &["name"]),
            ("configcpu", &["overheadLimit"]),
            ("runtimecpu", &["overallUsage"]),
        ]),
        3 => RelevanceSet::from_entries(&[
            ("payment", &[]),
            ("payment_amount", &["amount"]),
            ("tax", &["pama_id"]),
            ("supercharge", &["pama_id"]),
        ]),
        _ => unreachable!(),
    }
}

fn c3_snowflake() -> Check {
    let cdd = load_cdd().map_err(|e| e.to_string())?;
    let relta = q_relevance(2);
    let plan = decompose_solve(&relta, &cdd.model, None).map_err(|e| e.to_string())?;
    ensure(plan.core_walk.tables() == ["resource_pool"], format!("core walk {}", plan.core_walk))?;
    let branches: Vec<(String, Vec<String>)> = plan.branches.iter().map(|b| (b.root.clone(), b.tables.clone())).collect();
    let want = vec![
        ("resource_pool".to_string(), vec!["config".to_string(), "configcpu".to_string()]),
        ("resource_pool".to_string(), vec!["runtime".to_string(), "runtimecpu".to_string()]),
    ];
    ensure(branches == want, format!("branches {branches:?}"))?;
    let vp = plan_view(&plan, &relta, &cdd.model).map_err(|e| e.to_string())?;
    let view = emit_view_sql(&vp, "v", Default::default()).map_err(|e| e.to_string())?;
    let ours = sorted(joins_of_sql(&view.sql_text));
    let expected = sorted(joins_of_sql(&cdd.questions[1].gt_sql));
    ensure(ours == sorted(joins_of_plan(&vp)), "emitted SQL disagrees with the plan")?;
    ensure(ours.iter().all(|j| j.kind == JoinKind::Left), "not all joins are left joins")?;
    ensure(ours == expected, format!("joins {ours:?}\nexpected {expected:?}"))?;
    Ok(format!("{} left joins equal to the ground truth", ours.len()))
}

fn c4_double_occurrence() -> Check {
    let cdd = load_cdd().map_err(|e| e.to_string())?;
    let relta = q_relevance(3);
    let plan = decompose_solve(&relta, &cdd.model, None).map_err(|e| e.to_string())?;
    let vp = plan_view(&plan, &relta, &cdd.model).map_err(|e| e.to_string())?;
    let pama: Vec<usize> = vp.occurrences().iter().filter(|o| o.table == "payment_amount").map(|o| o.index).collect();
    ensure(pama == [1, 2], format!("payment_amount occurrences {pama:?}"))?;
    let view = emit_view_sql(&vp, "v", Default::default()).map_err(|e| e.to_string())?;
    let ours = sorted(joins_of_sql(&view.sql_text));
    let expected = sorted(joins_of_sql(&cdd.questions[2].gt_sql));
    // Same join graph and on-pairs; the ground truth inner-joins the two
    // payment_amount occurrences where the view uses left joins.
    let strip = |v: &[JoinShape]| -> Vec<(String, usize, BTreeSet<_>)> {
        v.iter().map(|j| (j.table.clone(), j.occurrence, j.on.clone())).collect()
    };
    ensure(strip(&ours) == strip(&expected), format!("joins {ours:?}\nexpected {expected:?}"))?;
    for t in ["tax", "supercharge"] {
        let j = ours.iter().find(|j| j.table == t).ok_or(format!("no join to {t}"))?;
        ensure(j.kind == JoinKind::Left, format!("{t} is not left joined"))?;
    }
    let aliases = vp.aliases();
    let distinct: BTreeSet<&&str> = aliases.iter().collect();
    ensure(distinct.len() == aliases.len(), "duplicate aliases")?;
    ensure(
        aliases.contains(&"payment_amount_amount") && aliases.contains(&"payment_amount_amount_2"),
        format!("aliases {aliases:?}"),
    )?;
    Ok("payment_amount#1 -> tax, payment_amount#2 -> supercharge, aliases distinct".into())
}

fn c5_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97);
    let t0 = Instant::now();
    let mut feasible = 0;
    for i in 0..ORACLE_PROBLEMS {
        let raw = oracle::RawProblem::random(&mut rng);
        let p = raw.to_problem();
        match (solve_path(&p), raw.brute_force_cost()) {
            (Ok(w), Some(c)) => {
                feasible += 1;
                ensure(w.cost == c, format!("problem {i}: cost {} vs {c}: {raw:?}", w.cost))?;
                ensure(check_walk(&w, &p).is_ok(), format!("problem {i}: {:?}", check_walk(&w, &p)))?;
            }
            (Err(SolveError::Infeasible { .. }), None) => {}
            (got, want) => return Err(format!("problem {i}: solver {got:?} vs enumeration {want:?}: {raw:?}")),
        }
    }
    let took = t0.elapsed();
    ensure(took < ORACLE_BUDGET, format!("took {took:?}"))?;
    Ok(format!("{ORACLE_PROBLEMS} problems ({feasible} feasible) agree in {took:?}"))
}

fn random_value(rng: &mut ChaCha8Rng) -> Value {
    match rng.gen_range(0..4) {
        0 => Value::Null,
        1 => Value::Int(rng.gen_range(0..3)),
        2 => Value::Real(rng.gen_range(0..3) as f64),
        _ => Value::Text(["a", "b"][rng.gen_range(0..2)].into()),
    }
}

fn random_set(rng: &mut ChaCha8Rng, cols: usize, rows: usize) -> ResultSet {
    ResultSet::new(
        (0..cols).map(|c| format!("c{c}")).collect(),
        (0..rows).map(|_| (0..cols).map(|_| random_value(rng)).collect()).collect(),
    )
}

fn c6_metrics() -> Check {
    let set = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let f = SqlFootprint {
        tables: set(&["client", "district"]),
        attributes: BTreeSet::new(),
    };
    let g = SqlFootprint {
        tables: set(&["client", "account", "district"]),
        attributes: BTreeSet::new(),
    };
    let (t, _) = coverage(&f, &g).map_err(|e| e.to_string())?;
    ensure((t - 2.0 / 3.0).abs() < COVERAGE_TOLERANCE, format!("cover_t {t}"))?;

    let dir = common::results_dir();
    let gt = load_result_csv(&dir.join("gt.csv")).map_err(|e| e.to_string())?;
    for (file, ex, esx) in common::METRIC_CASES {
        let r = load_result_csv(&dir.join(file)).map_err(|e| e.to_string())?;
        ensure(execution_match(&r, &gt) == ex && subset_match(&r, &gt) == esx, format!("truth table row {file}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut ex_true = 0;
    for _ in 0..IMPLICATION_PAIRS {
        let rows = rng.gen_range(0..4);
        let cols = rng.gen_range(1..4);
        let a = random_set(&mut rng, cols, rows);
        // Half the pairs derive g from f so that EX holds often enough.
        let b = if rng.gen_bool(0.5) {
            let keep = rng.gen_range(1..=a.arity());
            ResultSet::new(
                a.columns[..keep].to_vec(),
                a.rows.iter().rev().map(|r| r[..keep].to_vec()).collect(),
            )
        } else {
            let cols = rng.gen_range(1..4);
            random_set(&mut rng, cols, rows)
        };
        if execution_match(&a, &b) {
            ex_true += 1;
            ensure(subset_match(&a, &b), format!("EX without ESX: {a:?} {b:?}"))?;
        }
    }
    ensure(ex_true > 0, "no EX pair generated")?;
    Ok(format!(
        "cover_t = 2/3; {} CSV cases; EX => ESX on {IMPLICATION_PAIRS} pairs ({ex_true} with EX)",
        common::METRIC_CASES.len()
    ))
}

fn c7_golden_run() -> Check {
    let cdd = load_cdd().map_err(|e| e.to_string())?;
    let ex = SqliteExecutor::new(&cdd.model, cdd.seed);
    for q in 1..=3 {
        let args = vec![
            "sqlweave".to_string(),
            "ask".into(),
            "--mock".into(),
            common::transcript_path(q).display().to_string(),
            common::QUESTIONS[q - 1].into(),
        ];
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = cli::run(args, &mut out, &mut err);
        ensure(code == 0, format!("q{q}: {}", String::from_utf8_lossy(&err)))?;
        let view = fs::read_to_string(common::golden_path(q, "view")).map_err(|e| e.to_string())?;
        let fin = fs::read_to_string(common::golden_path(q, "final")).map_err(|e| e.to_string())?;
        ensure(out == format!("{view}\n{fin}").into_bytes(), format!("q{q}: output differs from goldens"))?;
        let mut s = ex.session().map_err(|e| e.to_string())?;
        s.execute_batch(&view).map_err(|e| e.to_string())?;
        let got = s.query(&fin).map_err(|e| e.to_string())?;
        ensure(execution_match(&got, &common::oracle(q)), format!("q{q}: result {got:?}"))?;
    }
    Ok("Q1-Q3 byte-identical and equal to hand-computed results".into())
}

fn c8_protocol() -> Check {
    let (model, ex, dataset, llm) = common::protocol_fixture();
    let rep = run_benchmark(&dataset, &model, &llm, &ex, &PipelineSettings::default(), Protocol::default());
    let got: Vec<(usize, bool)> = rep.records.iter().map(|r| (r.ex_votes, r.ex)).collect();
    ensure(got == [(20, true), (6, true), (5, false)], format!("votes {got:?}"))?;
    ensure(rep.aggregates.ex_solved == 2, format!("EX count {}", rep.aggregates.ex_solved))?;
    Ok("20/20 and 6/20 solved, 5/20 not; EX count 2".into())
}

fn c9_report_rows() -> Check {
    let (model, ex, dataset, llm) = common::protocol_fixture();
    let rep: BenchmarkReport = run_benchmark(&dataset, &model, &llm, &ex, &PipelineSettings::default(), Protocol::default());
    let text = rep.to_text();
    for label in ["cover_t", "cover_a", "EX", "ESX"] {
        ensure(text.lines().any(|l| l.split_whitespace().next() == Some(label)), format!("no {label} row"))?;
    }
    let json: serde_json::Value = serde_json::from_str(&rep.to_json()).map_err(|e| e.to_string())?;
    for key in ["cover_t", "cover_a", "ex_solved", "esx_solved"] {
        ensure(json["aggregates"].get(key).is_some(), format!("no {key} in JSON"))?;
    }
    Ok("published benchmark numbers need proprietary models and data; report rows cover_t, cover_a, EX, ESX present".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("green-path reproduction", c1_green_path),
        ("lookup rejection", c2_lookup_rejection),
        ("snowflake decomposition", c3_snowflake),
        ("star double occurrence", c4_double_occurrence),
        ("solver-oracle equivalence", c5_oracle),
        ("metric fixtures", c6_metrics),
        ("end-to-end golden run", c7_golden_run),
        ("protocol arithmetic", c8_protocol),
        ("report format", c9_report_rows),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("acceptance {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
