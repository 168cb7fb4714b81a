use std::process::{Command, Output};

use serde_json::Value;

fn specflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specflow")).args(args).output().expect("binary runs")
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("every stdout line is a JSON record"))
        .collect()
}

#[test]
fn model_loop_record() {
    let out = specflow(&["sf-loop", "--model", "k=2,dim=3"]);
    assert!(out.status.success());
    let recs = records(&out);
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["version"], 1);
    assert_eq!(recs[0]["command"], "sf-loop");
    assert_eq!(recs[0]["result"]["report"]["value"], 2);
}

#[test]
fn integral_methods_agree_on_model_loop() {
    for method in ["alpha", "beta", "det"] {
        let out = specflow(&["sf-loop", "--model", "k=1,dim=2", "--method", method]);
        assert!(out.status.success(), "{method}");
        assert_eq!(records(&out)[0]["result"]["report"]["value"], 1, "{method}");
    }
}

#[test]
fn missing_input_gives_error_record() {
    let out = specflow(&["det", "--matrix", "/nonexistent/m.json"]);
    assert_eq!(out.status.code(), Some(1));
    let recs = records(&out);
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["error"]["kind"], "input");
}

#[test]
fn invalid_option_is_usage_error() {
    let out = specflow(&["sf-loop", "--model", "k=1,dim=2", "--tol=-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(records(&out)[0]["error"]["kind"], "config");

    let out = specflow(&["sf-loop", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(records(&out)[0]["error"]["kind"], "usage");
}

#[test]
fn det_and_cayley_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let swap = dir.path().join("swap.json");
    let id = dir.path().join("id.json");
    std::fs::write(&swap, r#"{"re": [[0, 1], [1, 0]]}"#).unwrap();
    std::fs::write(&id, r#"{"re": [[1, 0], [0, 1]]}"#).unwrap();

    let out = specflow(&["det", "--matrix", swap.to_str().unwrap(), "--p", "2"]);
    assert!(out.status.success());
    let det = &records(&out)[0]["result"];
    // eigenvalues ±1: Det_2 = (1 − 2) e^{2} · e^{0}
    let re = det["definition"]["value"][0].as_f64().unwrap();
    assert!((re + 2f64.exp()).abs() < 1e-10);
    assert!(det["discrepancy"].as_f64().unwrap() < 1e-10);

    let out = specflow(&["cayley", "--matrix", swap.to_str().unwrap(), "--other", id.to_str().unwrap()]);
    assert!(out.status.success());
    let c = &records(&out)[0]["result"];
    assert!(c["round_trip_defect"].as_f64().unwrap() < 1e-12);
}

#[test]
fn levinson_writes_records_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = specflow(&[
        "levinson",
        "--well",
        "depth=5,halfwidth=1",
        "--grid",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rec = &records(&out)[0]["result"];
    assert_eq!(rec["report"]["bound_states"], 2);
    assert_eq!(rec["report"]["phillips"]["value"], -1);

    let saved = std::fs::read_to_string(out_dir.join("records.jsonl")).unwrap();
    assert_eq!(saved.lines().count(), 1);
    let csv = std::fs::read_to_string(out_dir.join("levinson_sweep.csv")).unwrap();
    assert!(csv.starts_with("lambda,"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn selftest_passes() {
    let out = specflow(&["selftest"]);
    let recs = records(&out);
    let summary = recs.last().unwrap();
    assert_eq!(summary["summary"]["pass"], true, "{recs:#?}");
    assert!(out.status.success());
}
