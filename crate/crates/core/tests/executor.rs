mod common;

use contraplan::executor::{run_baseline, ExecutionLog, Method, StepMode};
use contraplan::scenes::demo_scene;

#[test]
fn log_round_trips_through_jsonl() {
    let log = run_baseline(Method::Ocl, &demo_scene(), "demo", &common::tiny_executor(), 4).unwrap();
    let back = ExecutionLog::from_jsonl(&log.to_jsonl()).unwrap();
    assert_eq!(back, log);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    log.save(&path).unwrap();
    assert_eq!(ExecutionLog::load(&path).unwrap(), log);
}

#[test]
fn runs_are_reproducible_and_open_loop_methods_never_observe() {
    let cfg = common::tiny_executor();
    for method in [Method::Ol, Method::Rol, Method::Cp] {
        let a = run_baseline(method, &demo_scene(), "demo", &cfg, 2).unwrap();
        let b = run_baseline(method, &demo_scene(), "demo", &cfg, 2).unwrap();
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.summary.percent_open_loop, 100.0);
        assert!(a.steps.iter().all(|s| s.mode == StepMode::OpenLoop && s.observed_state.is_none()));
    }
}

#[test]
fn cc_replans_every_step() {
    let log = run_baseline(Method::Cc, &demo_scene(), "demo", &common::tiny_executor(), 0).unwrap();
    assert!(!log.steps.is_empty());
    assert_eq!(log.summary.optimizer_invocations, log.steps.len());
    assert_eq!(log.summary.percent_open_loop, 0.0);
}
