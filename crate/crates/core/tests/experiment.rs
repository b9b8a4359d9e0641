use std::path::Path;

use resq_core::harness::{emit_report, run_experiment, ExperimentConfig, RunOptions, RunSummary};

const SCENARIO: &str = r#"{
  "bounds": {"lat_min": 29.422486, "lat_max": 30.154665, "lon_min": -95.874178, "lon_max": -95.069705},
  "grid": {"rows": 25, "cols": 25},
  "snapshots": [
    {"timestamp": "2017-08-28T00:00:00Z",
     "volunteers": [{"id": "u1", "lat": 29.7604, "lon": -95.3698}, {"id": "u2", "lat": 29.95, "lon": -95.6}],
     "victims": [{"id": "v1", "lat": 29.80, "lon": -95.40}, {"id": "v2", "lat": 29.70, "lon": -95.30}, {"id": "v3", "lat": 30.0, "lon": -95.5}]},
    {"timestamp": "2017-08-28T01:00:00Z",
     "victims": [{"id": "v4", "lat": 29.5, "lon": -95.2}]}
  ]
}"#;

fn small(policies: &[&str], seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(&format!(
        r#"{{"grid": {{"rows": 8, "cols": 8}}, "synthetic": {{"agents": 2, "victims": 4}},
            "policies": {policies:?}, "train_episodes": 150, "eval_episodes": 60, "seed": {seed}, "step_cap": 120}}"#
    ))
    .unwrap();
    cfg.validate().unwrap();
    cfg.learner.epsilon_end = Some(0.05);
    cfg
}

fn check_summary(s: &RunSummary, episodes: usize) {
    assert_eq!(s.episodes, episodes);
    assert!(s.avg_time >= 1.0);
    assert!((s.reward_rate - s.avg_reward / s.avg_time).abs() < 1e-12);
    match s.rescuing_cost {
        Some(c) => assert!((c * s.reward_rate - 1.0).abs() < 1e-12),
        None => assert!(s.reward_rate <= 0.0),
    }
}

#[test]
fn all_policies_on_a_small_grid() {
    let cfg = small(&["resq", "rl", "greedy", "rule", "vi", "random"], 3);
    let summaries = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let names: Vec<&str> = summaries.iter().map(|s| s.policy.as_str()).collect();
    assert_eq!(names, ["resq", "rl", "greedy", "rule", "vi", "random"]);
    for s in &summaries {
        check_summary(s, 60);
        assert_eq!(s.learning_curve.is_some(), s.policy == "resq" || s.policy == "rl");
    }
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&summaries, dir.path()).unwrap();
    assert_eq!(files.len(), 4);
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = small(&["resq", "random", "greedy"], 9);
    let a = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let b = run_experiment(
        &cfg,
        &RunOptions {
            threads: Some(3),
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn policy_order_does_not_change_results() {
    let a = run_experiment(&small(&["random", "rl"], 5), &RunOptions::default()).unwrap();
    let b = run_experiment(&small(&["rl", "random"], 5), &RunOptions::default()).unwrap();
    assert_eq!(a[0], b[1]);
    assert_eq!(a[1], b[0]);
}

#[test]
fn scenario_snapshots_drive_the_start_state() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("houston.json"), SCENARIO).unwrap();
    let run = |snapshot: usize| {
        let cfg = ExperimentConfig::from_json(&format!(
            r#"{{"scenario": "houston.json", "snapshot": {snapshot}, "policies": ["greedy"], "eval_episodes": 3, "seed": 1}}"#
        ))
        .unwrap();
        run_experiment(
            &cfg,
            &RunOptions {
                threads: None,
                base_dir: dir.path().to_path_buf(),
            },
        )
    };
    let first = run(0).unwrap();
    let second = run(1).unwrap();
    assert_eq!(first[0].avg_reward, 30.0);
    assert_eq!(second[0].avg_reward, 40.0);
    let err = run(2).unwrap_err();
    assert!(err.is_config());
}

#[test]
fn missing_scenario_is_a_config_error() {
    let cfg = ExperimentConfig::from_json(r#"{"scenario": "nope.json", "policies": ["random"], "seed": 1}"#).unwrap();
    let err = run_experiment(
        &cfg,
        &RunOptions {
            threads: None,
            base_dir: Path::new("/nonexistent").to_path_buf(),
        },
    )
    .unwrap_err();
    assert!(err.is_config());
}
