mod common;

use common::{cdd_rules, protocol_fixture as setup};
use sqlweave::eval::{run_benchmark, Protocol};
use sqlweave::exec::SqliteExecutor;
use sqlweave::fixtures::load_cdd;
use sqlweave_core::pipeline::PipelineSettings;

#[test]
fn solved_means_more_than_threshold_matches() {
    let (model, ex, dataset, llm) = setup();
    let rep = run_benchmark(&dataset, &model, &llm, &ex, &PipelineSettings::default(), Protocol::default());
    let votes: Vec<(usize, bool)> = rep.records.iter().map(|r| (r.ex_votes, r.ex)).collect();
    assert_eq!(votes, vec![(20, true), (6, true), (5, false)]);
    assert_eq!(rep.aggregates.ex_solved, 2);
    assert_eq!(rep.aggregates.ex_unsolved, 1);
    assert_eq!(rep.aggregates.errored, 0);
}

#[test]
fn parallel_run_matches_sequential() {
    let (model, ex, dataset, llm) = setup();
    let seq = run_benchmark(&dataset, &model, &llm, &ex, &PipelineSettings::default(), Protocol::default());
    let par = run_benchmark(
        &dataset,
        &model,
        &llm,
        &ex,
        &PipelineSettings::default(),
        Protocol {
            jobs: 3,
            ..Protocol::default()
        },
    );
    assert_eq!(seq.records, par.records);
    assert_eq!(seq.aggregates, par.aggregates);
}

#[test]
fn broken_ground_truth_is_recorded_not_fatal() {
    let (model, ex, mut dataset, llm) = setup();
    dataset[1].gt_sql = "select nope from t".into();
    let rep = run_benchmark(&dataset, &model, &llm, &ex, &PipelineSettings::default(), Protocol::default());
    let a = &rep.aggregates;
    assert_eq!(a.errored, 1);
    assert!(rep.records[1].error.as_deref().unwrap().contains("kind=ground_truth"));
    assert_eq!(a.ex_solved + a.ex_unsolved + a.errored, dataset.len());
}

#[test]
fn empty_dataset_gives_an_empty_report() {
    let (model, ex, _, llm) = setup();
    let rep = run_benchmark(&[], &model, &llm, &ex, &PipelineSettings::default(), Protocol::default());
    assert!(rep.records.is_empty());
    assert_eq!(rep.aggregates.questions, 0);
    assert_eq!(rep.aggregates.cover_t, 0.0);
}

#[test]
fn cdd_questions_are_solved_with_full_coverage_of_tables() {
    let cdd = load_cdd().unwrap();
    let ex = SqliteExecutor::new(&cdd.model, cdd.seed);
    for (i, item) in cdd.questions.iter().enumerate() {
        let rep = run_benchmark(
            std::slice::from_ref(item),
            &cdd.model,
            &cdd_rules(i + 1),
            &ex,
            &PipelineSettings::default(),
            Protocol::default(),
        );
        let r = &rep.records[0];
        assert!(r.error.is_none(), "q{}: {:?}", i + 1, r.error);
        assert!(r.ex && r.esx, "q{}: {r:?}", i + 1);
        assert_eq!(r.cover_t, Some(1.0), "q{}", i + 1);
        let mean = rep.aggregates.cover_t;
        assert_eq!(mean, 1.0);
        let text = rep.to_text();
        assert!(text.contains("EX") && text.contains("1/1"));
    }
}
