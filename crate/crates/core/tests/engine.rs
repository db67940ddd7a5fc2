mod common;

use std::collections::HashMap;
use std::sync::Arc;

use common::*;
use indexmap::IndexMap;
use nomos_core::models::{DataSource, DecisionTree, Dense, GameState, LanderModel, Mlp, ModelBackend, TreeNode};
use nomos_core::{EngineError, Harness, RunConfig, RunReport};
use proptest::prelude::*;

fn config(budget: u64, seed: u64) -> RunConfig {
    RunConfig { budget, seed, ..RunConfig::default() }
}

fn constant_tree(class: i64) -> Arc<dyn ModelBackend> {
    Arc::new(DecisionTree::new(vec![TreeNode::Leaf { class }], 0).unwrap())
}

fn compas_harness(src: &str, model: Arc<dyn ModelBackend>) -> Harness {
    let sources = bind_all(src, &source("compas.csv"));
    Harness::new(typed_from_src(src, &sources), &sources, model, Default::default()).unwrap()
}

fn run(h: &Harness, budget: u64, seed: u64) -> RunReport {
    h.run(&config(budget, seed)).unwrap()
}

#[test]
fn unsatisfiable_precondition_exhausts_retries() {
    let h = compas_harness("input x;\nrequires false;\noutput d;\n{\n  d = predict(x)\n}\n", constant_tree(0));
    let err = h.run(&RunConfig { max_retries: 37, ..config(5, 0) }).unwrap_err();
    let EngineError::AtTest { test_index: 0, source } = err else { panic!("{err}") };
    assert!(matches!(*source, EngineError::RetryExhausted { attempts: 37 }), "{source}");
}

#[test]
fn no_precondition_accepts_every_first_candidate() {
    let h = compas_harness("input x;\noutput d;\n{\n  d = predict(x)\n}\nensures d == 0;\n", constant_tree(0));
    let r = run(&h, 300, 4);
    assert_eq!((r.passed, r.precond_violations, r.postcond_violations), (300, 0, 0));
}

#[test]
fn rejected_candidates_are_regenerated() {
    let (spec, sources) = corpus_spec("compas_felony_inc");
    let h = Harness::new(spec, &sources, model("compas_dt_monotone.json"), Default::default()).unwrap();
    let r = run(&h, 2000, 3);
    assert!(r.precond_violations > 0);
    assert_eq!(r.passed, 2000);
    assert_eq!(r.attempts(), 2000 + r.precond_violations);
}

#[test]
fn no_ensures_means_every_test_passes() {
    let h = compas_harness("input x;\noutput d;\n{\n  d = predict(x)\n}\n", constant_tree(2));
    let r = run(&h, 50, 0);
    assert_eq!((r.passed, r.postcond_violations, r.unique_bugs), (50, 0, 0));
}

#[test]
fn violated_clause_indices_are_recorded() {
    let src = "input x;\noutput d;\n{\n  d = predict(x)\n}\nensures d == 1;\nensures d >= 0;\nensures d < 1;\n";
    let h = compas_harness(src, constant_tree(1));
    let r = run(&h, 20, 0);
    assert_eq!(r.postcond_violations, 20);
    assert!(r.bugs.iter().all(|b| b.violated == vec![2]));
    assert_eq!(r.bugs[0].outputs["d"], serde_json::json!(1));
}

#[test]
fn implication_is_vacuous_when_the_premise_fails() {
    let src = read_spec("mnist_blur");
    let data = source("mnist_grid.csv");
    let sources = bind_all(&src, &data);
    // Always class 9, which is never a label in the fixture, so d2 == v1 is always false.
    let mut bias = vec![0.0; 10];
    bias[9] = 1.0;
    let net = Mlp::new(vec![Dense { inputs: 16, outputs: 10, weights: vec![0.0; 160], bias }]).unwrap();
    let h = Harness::new(typed_from_src(&src, &sources), &sources, Arc::new(net), Default::default()).unwrap();
    assert_eq!(run(&h, 100, 0).passed, 100);
}

#[test]
fn runtime_errors_name_the_test() {
    let h = compas_harness("input x;\nvar v := getFeat(x, 4) * 0;\noutput d;\n{\n  d = 1 / v\n}\n", constant_tree(0));
    let err = h.run(&config(3, 0)).unwrap_err();
    let msg = err.to_string();
    assert!(msg.starts_with("test 0:") && msg.contains("division by zero"), "{msg}");
}

#[test]
fn every_input_needs_a_source() {
    let src = "input x;\ninput y;\noutput d;\n{\n  d = predict(x)\n}\n";
    let mut sources: IndexMap<String, Arc<DataSource>> = bind_all(src, &source("compas.csv"));
    let typed = typed_from_src(src, &sources);
    sources.shift_remove("y");
    let err = Harness::new(typed, &sources, constant_tree(0), Default::default()).err().unwrap();
    assert!(matches!(err, EngineError::MissingSource(ref n) if n == "y"));
}

#[test]
fn same_configuration_same_report() {
    let (spec, sources) = corpus_spec("speech_wnoise");
    let h = Harness::new(spec, &sources, model("grid_mlp.json"), Default::default()).unwrap();
    assert_eq!(run(&h, 300, 11), run(&h, 300, 11));
}

fn lander_report(policy: &str) -> (Harness, RunReport) {
    let (spec, sources) = corpus_spec("lunar_relax");
    let h = Harness::new(spec, &sources, model(policy), Default::default()).unwrap();
    let r = run(&h, 200, 5);
    (h, r)
}

#[test]
fn episode_draws_stay_out_of_the_trace() {
    let (_, r) = lander_report("lander_buggy.json");
    assert!(!r.bugs.is_empty());
    // Ten randInt seeds per test; the twenty episodes add nothing.
    assert!(r.bugs.iter().all(|b| b.replay_draws.len() == 10));
}

#[test]
fn play_is_deterministic() {
    let doc = std::fs::read_to_string(fixture("lander_buggy.json")).unwrap();
    let lander: LanderModel = serde_json::from_str::<serde_json::Value>(&doc)
        .map(|mut j| {
            j.as_object_mut().unwrap().remove("type");
            serde_json::from_value(j).unwrap()
        })
        .unwrap();
    let state = GameState { terrain: 4, lander_x: 13, lander_vy: -3, fuel: 30 };
    for seed in [0, 1, 99, u64::MAX] {
        let first = lander.play(&state, seed).unwrap();
        assert!((0..1000).all(|_| lander.play(&state, seed).unwrap() == first));
    }
}

#[test]
fn k_safety_arity() {
    let (spec, sources) = corpus_spec("compas_felony_inc");
    let h = Harness::new(spec, &sources, model("compas_mlp.json"), Default::default()).unwrap();
    assert_eq!(run(&h, 100, 0).invocations_per_test, 2);
    let (_, r) = lander_report("lander_safe.json");
    assert_eq!(r.invocations_per_test, 20);
}

#[test]
fn bugs_replay_to_their_violations() {
    let cases = [
        ("compas_felony_inc", "compas_dt_nonmonotone.json"),
        ("compas_priors_inc", "compas_mlp.json"),
        ("compas_felony_dec", "compas_mlp.json"),
        ("speech_wnoise", "grid_mlp.json"),
        ("mnist_blur", "grid_mlp.json"),
        ("lunar_relax", "lander_buggy.json"),
    ];
    let mut total = 0;
    for (name, m) in cases {
        let (spec, sources) = corpus_spec(name);
        let h = Harness::new(spec, &sources, model(m), Default::default()).unwrap();
        for seed in 0..2 {
            let r = run(&h, 300, seed);
            for bug in &r.bugs {
                assert_eq!(h.replay(bug).unwrap(), bug.violated, "{name} test {}", bug.test_index);
                let back: nomos_core::Bug = serde_json::from_str(&serde_json::to_string(bug).unwrap()).unwrap();
                assert_eq!(h.replay(&back).unwrap(), bug.violated);
            }
            total += r.bugs.len();
        }
    }
    assert!(total > 0);
}

#[test]
fn equal_hashes_mean_equal_tests() {
    for (name, m) in [("compas_felony_inc", "compas_dt_nonmonotone.json"), ("lunar_relax", "lander_buggy.json")] {
        let (spec, sources) = corpus_spec(name);
        let h = Harness::new(spec, &sources, model(m), Default::default()).unwrap();
        let r = run(&h, 3000, 0);
        let mut by_hash = HashMap::new();
        for bug in &r.bugs {
            let key = (&bug.inputs, &bug.vars, &bug.replay_draws);
            if let Some(prev) = by_hash.insert(bug.trace_hash, key) {
                assert_eq!(prev, key, "{name}: hash {:#x} shared by different tests", bug.trace_hash);
            }
        }
        assert_eq!(r.unique_bugs as usize, by_hash.len());
        assert_eq!(r.bugs.len() as u64, r.postcond_violations);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn accounting_holds_for_any_seed(seed in any::<u64>(), budget in 1u64..400) {
        let (spec, sources) = corpus_spec("compas_priors_inc");
        let h = Harness::new(spec, &sources, model("compas_dt_nonmonotone.json"), Default::default()).unwrap();
        let r = run(&h, budget, seed);
        prop_assert_eq!(r.passed + r.postcond_violations, budget);
        prop_assert_eq!(r.bugs.len() as u64, r.postcond_violations);
        prop_assert!(r.unique_bugs <= r.postcond_violations);
        prop_assert_eq!(r.seed, seed);
    }
}
