use std::process::{Command, Output};

use serde_json::Value;

fn momentgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momentgate"))
        .args(args)
        .env_remove("MOMENTGATE_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn analyze_gevrey_above_threshold() {
    let o = momentgate(&["analyze", r#"{"kind":"gevrey","s":2.5}"#]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["injective"]["status"], "fails");
    assert_eq!(v["surjective"]["status"], "holds_at_horizon");
}

#[test]
fn analyze_half_power_is_neither() {
    let o = momentgate(&[
        "analyze",
        r#"{"kind":"derived","op":"power","s":0.5,"base":{"kind":"example38"}}"#,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["injective"]["status"], "fails");
    assert_eq!(v["surjective"]["status"], "fails");
}

#[test]
fn analyze_output_is_deterministic() {
    let args = ["analyze", r#"{"kind":"q_gevrey","q":2}"#, "--horizon", "2000"];
    let a = momentgate(&args);
    let b = momentgate(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn malformed_json_reports_position() {
    let o = momentgate(&["analyze", r#"{"kind":"gevrey", "s": }"#]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1 column"), "{}", stderr(&o));
}

#[test]
fn invalid_fields_are_named() {
    let o = momentgate(&["analyze", r#"{"kind":"gevrey"}"#]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`s`"), "{}", stderr(&o));
    let o = momentgate(&["analyze", r#"{"kind":"q_gevrey","q":0.5}"#]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`q`"), "{}", stderr(&o));
}

#[test]
fn spec_from_file_and_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"kind":"gevrey","s":0.5}"#).unwrap();
    let out = dir.path().join("report.csv");
    let o = momentgate(&[
        "analyze",
        spec.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("schema,label,param,horizon"));
    assert!(lines.next().unwrap().contains("gevrey(0.5)"));
}

#[test]
fn cache_directory_is_populated_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_momentgate"))
            .args(["analyze", r#"{"kind":"gevrey","s":1.5}"#])
            .env("MOMENTGATE_CACHE_DIR", dir.path())
            .output()
            .unwrap()
    };
    let first = run();
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
    let second = run();
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn sweep_rows_and_markers() {
    let o = momentgate(&["sweep", "--family", "q_gevrey", "--grid", "1.5,2,4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut rdr = csv_rows(&text);
    let header = rdr.remove(0);
    let gamma_upper = header.iter().position(|h| h == "gamma_upper").unwrap();
    assert_eq!(rdr.len(), 3);
    for row in &rdr {
        assert_eq!(row.len(), header.len());
        assert_eq!(row[gamma_upper], "+inf");
    }
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn empty_grid_is_an_error() {
    let o = momentgate(&["sweep", "--family", "gevrey", "--grid", ""]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(momentgate(&["verify", "nope"]).status.code(), Some(1));
    assert_eq!(momentgate(&["analyze"]).status.code(), Some(1));
    assert_eq!(momentgate(&["--help"]).status.code(), Some(0));
}

#[test]
fn horizon_below_minimum_is_an_error() {
    let o = momentgate(&["analyze", r#"{"kind":"gevrey","s":2}"#, "--horizon", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("horizon"));
}

#[test]
fn verify_inversion_passes() {
    let o = momentgate(&["verify", "inversion", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["suite"], "inversion");
    assert_eq!(v["passed"], true);
    assert_eq!(v["checks"][0]["detail"]["exact"], 100);
}

#[test]
fn verify_example38_pretty() {
    let o = momentgate(&["verify", "example38", "--format", "pretty"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS omega_index"));
}
