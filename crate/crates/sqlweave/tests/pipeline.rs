mod common;

use common::{cdd_rules, QUESTIONS};
use sqlweave::fixtures::load_cdd;
use sqlweave::llm::{ScriptedLlm, Transcript};
use sqlweave_core::ddl::parse_ddl;
use sqlweave_core::pipeline::{answer_question, Phase, PipelineSettings};
use sqlweave_core::view::JoinKind;
use sqlweave_core::Question;

fn scripted(responses: &[&[&str]]) -> ScriptedLlm {
    ScriptedLlm::new(Transcript::from_responses(
        responses.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
    ))
}

#[test]
fn snowflake_question_uses_left_joined_branches() {
    let cdd = load_cdd().unwrap();
    let r = answer_question(&Question::new(QUESTIONS[1]), &cdd.model, &cdd_rules(2), &PipelineSettings::default()).unwrap();
    assert_eq!(r.plan.core_walk.tables(), ["resource_pool"]);
    assert_eq!(r.view_plan.joins.len(), 4);
    assert!(r.view_plan.joins.iter().all(|j| j.kind == JoinKind::Left));
    assert_eq!(r.query.vote_count, 17);
    assert_eq!(r.query.sample_total, 20);
    assert_eq!(r.samples.iter().filter(|s| s.is_none()).count(), 1);
    let phases: Vec<Phase> = r.phase_log.iter().map(|e| e.phase).collect();
    assert!(phases.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(phases.last(), Some(&Phase::ToSql));
}

#[test]
fn same_transcript_same_result() {
    let cdd = load_cdd().unwrap();
    let q = Question::new(QUESTIONS[0]);
    let a = answer_question(&q, &cdd.model, &cdd_rules(1), &PipelineSettings::default()).unwrap();
    let b = answer_question(&q, &cdd.model, &cdd_rules(1), &PipelineSettings::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn empty_retrieval_is_a_retrieve_error() {
    let cdd = load_cdd().unwrap();
    let llm = scripted(&[&["[]"]]);
    let e = answer_question(&Question::new("anything"), &cdd.model, &llm, &PipelineSettings::default()).unwrap_err();
    assert_eq!((e.phase, e.kind), (Phase::Retrieve, "retrieval_empty"));
    assert!(e.message.contains("anything"));
    assert!(e.partial.relevance.is_none());
}

#[test]
fn disconnected_tables_fail_in_solve_and_keep_retrieval() {
    let model = parse_ddl("create table a (id int, primary key (id)); create table b (id int, primary key (id));").unwrap();
    let llm = scripted(&[&["['a', 'b']"], &["[id]"], &["[id]"]]);
    let e = answer_question(&Question::new("q"), &model, &llm, &PipelineSettings::default()).unwrap_err();
    assert_eq!((e.phase, e.kind), (Phase::Solve, "infeasible"));
    let kept = e.partial.relevance.as_ref().expect("retrieval output kept");
    assert_eq!(kept.tables().collect::<Vec<_>>(), ["a", "b"]);
    assert!(e.to_string().starts_with("phase=solve kind=infeasible"));
}

#[test]
fn answers_without_sql_fail_in_to_sql_and_keep_the_view() {
    let model = parse_ddl("create table a (id int, name text, primary key (id));").unwrap();
    let llm = scripted(&[&["['a']"], &["[name]"], &["I don't know"]]);
    let settings = PipelineSettings::default();
    let e = answer_question(&Question::new("q"), &model, &llm, &settings).unwrap_err();
    assert_eq!((e.phase, e.kind), (Phase::ToSql, "extraction"));
    let view = e.partial.view.expect("view kept");
    assert_eq!(view.sql_text, "create view v as select\n  a.id as a_id,\n  a.name as a_name\nfrom a");
    assert!(e.partial.plan.is_some());
}
