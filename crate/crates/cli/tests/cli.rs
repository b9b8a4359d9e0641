use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn resq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resq"))
        .args(args)
        .env_remove("RESQ_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn bundled_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const CSV: &str = "timestamp,role,id,lat,lon
2017-08-28T00:00:00Z,volunteer,u1,29.7604,-95.3698
2017-08-28T00:00:00Z,volunteer,u2,29.9,-95.5
2017-08-28T00:00:00Z,victim,v1,29.8,-95.4
2017-08-28T00:00:00Z,victim,v2,29.7,-95.3
2017-08-28T00:00:00Z,victim,v3,30.0,-95.6
";

fn small_config(dir: &Path, policies: &str) -> String {
    write(
        dir,
        "small.json",
        &format!(
            r#"{{"grid": {{"rows": 5, "cols": 5}}, "synthetic": {{"agents": 1, "victims": 2}},
                "policies": {policies}, "train_episodes": 100, "eval_episodes": 20, "seed": 4, "step_cap": 60}}"#
        ),
    )
}

#[test]
fn convert_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.csv", CSV);
    let out = dir.path().join("scenario.json");
    let o = resq(&["convert", "--csv", &input, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "snapshot 1: 2 volunteers, 3 victims");
    let json = std::fs::read_to_string(&out).unwrap();
    assert!(json.contains("\"snapshots\""));

    // The converted file converts again to the same document.
    let again = dir.path().join("again.json");
    let o = resq(&["convert", "--json", out.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&again).unwrap(), json);
}

#[test]
fn convert_out_of_region() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.csv", &format!("{CSV}2017-08-28T00:00:00Z,victim,v4,31.5,-95.4\n"));
    let out = dir.path().join("scenario.json");
    let o = resq(&["convert", "--csv", &input, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside"));
    assert!(!out.exists());

    let o = resq(&["convert", "--csv", &input, "--out", out.to_str().unwrap(), "--clamp"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "snapshot 1: 2 volunteers, 4 victims");
    let json = std::fs::read_to_string(&out).unwrap();
    assert!(json.contains("30.154665"));
}

#[test]
fn convert_flag_errors() {
    assert_eq!(resq(&["convert", "--out", "x.json"]).status.code(), Some(1));
    assert_eq!(resq(&["convert", "--csv", "a", "--json", "b", "--out", "x"]).status.code(), Some(1));
    assert_eq!(resq(&["convert", "--csv", "a", "--out", "x", "--bogus"]).status.code(), Some(1));
    assert_eq!(resq(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(resq(&["--help"]).status.code(), Some(0));
}

#[test]
fn compare_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let o = resq(&["compare", "--config", bundled_config().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).take_while(|l| !l.starts_with("report")).collect();
    assert_eq!(rows.len(), 6);
    let rates: Vec<f64> = rows.iter().map(|r| r.split_whitespace().nth(4).unwrap().parse().unwrap()).collect();
    assert!(rates.windows(2).all(|w| w[0] >= w[1]));
    for f in ["summary.csv", "summary.json", "learning_curve_resq.svg", "learning_curve_rl.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(out.join("summary.csv")).unwrap().lines().count(), 7);
}

#[test]
fn compare_single_policy_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), r#"["greedy"]"#);
    let out = dir.path().join("r");
    let o = resq(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 3);

    let missing = dir.path().join("missing.json");
    let o = resq(&["compare", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let bad = small_config(dir.path(), r#"["greedy", "oracle"]"#);
    let o = resq(&["compare", "--config", &bad, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("policies[1]"));

    let good = small_config(dir.path(), r#"["random"]"#);
    let o = Command::new(env!("CARGO_BIN_EXE_resq"))
        .args(["compare", "--config", &good, "--out", out.to_str().unwrap()])
        .env("RESQ_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_writes_table_and_repeatable_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), r#"["resq"]"#);
    let table = dir.path().join("q.json");
    let o = resq(&["train", "--config", &cfg, "--policy", "resq", "--out", table.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let q = std::fs::read_to_string(&table).unwrap();
    assert!(q.trim_start().starts_with('{'));
    let curve_path = dir.path().join("q.curve.csv");
    let first = std::fs::read(&curve_path).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("episode,reward,steps"));
    assert_eq!(text.lines().count(), 101);

    let second_path = dir.path().join("again.csv");
    let o = resq(&[
        "train", "--config", &cfg, "--policy", "resq", "--out", table.to_str().unwrap(),
        "--curve", second_path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(second_path).unwrap(), first);

    let o = resq(&["train", "--config", &cfg, "--policy", "dqn", "--out", table.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_check() {
    let o = resq(&["oracle-check", "--size", "5", "--instances", "1000"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("hungarian==bruteforce: 1000/1000"));
    assert!(text.contains("greedy>=optimum: 1000/1000"));
    assert_eq!(stdout(&resq(&["oracle-check", "--size", "5", "--instances", "1000"])), text);

    assert_eq!(resq(&["oracle-check", "--size", "8", "--instances", "10"]).status.code(), Some(1));
    assert_eq!(resq(&["oracle-check", "--size", "5", "--instances", "0"]).status.code(), Some(1));
}
