use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bip-enforce"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn philosophers(dir: &Path) {
    let out = run_in(dir, &["gen-bench", "philosophers", "2", "-o", "."]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn explore_finds_the_two_step_deadlock() {
    let d = tempfile::tempdir().unwrap();
    philosophers(d.path());
    let out = run_in(d.path(), &["explore", "philosophers-2.model.json"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["deadlock_path"].as_array().unwrap().len(), 2);
    assert_eq!(v["truncated"], false);
}

#[test]
fn validate_reports_structural_errors() {
    let d = tempfile::tempdir().unwrap();
    philosophers(d.path());
    assert_eq!(run_in(d.path(), &["validate", "philosophers-2.model.json"]).status.code(), Some(0));
    fs::write(d.path().join("bad.json"), r#"{"components": [], "connectors": []}"#).unwrap();
    assert_eq!(run_in(d.path(), &["validate", "bad.json"]).status.code(), Some(2));
    fs::write(d.path().join("broken.json"), "{").unwrap();
    assert_eq!(run_in(d.path(), &["validate", "broken.json"]).status.code(), Some(2));
}

#[test]
fn parity_oracle_is_not_enforceable() {
    let d = tempfile::tempdir().unwrap();
    let parity = r#"{"states": [{"name": "even", "accepting": true}, {"name": "odd", "accepting": false}],
        "initial": "even",
        "transitions": [{"from": "even", "event": "c.x = 0", "to": "odd"}, {"from": "odd", "event": "c.x = 0", "to": "even"}]}"#;
    fs::write(d.path().join("parity.json"), parity).unwrap();
    let out = run_in(d.path(), &["classify", "parity.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["stutter_invariant"], false);
}

#[test]
fn supervised_run_rollbacks_recount_from_trace() {
    let d = tempfile::tempdir().unwrap();
    philosophers(d.path());
    let out = run_in(d.path(), &["supervise", "philosophers-2.model.json", "philosophers-2.oracle.json", "-o", "sup.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.path().join("sup.provenance.json").exists());
    let args = ["run", "sup.json", "--seed", "5", "--max-steps", "3000", "--trace", "t.jsonl"];
    let out = run_in(d.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out);
    assert_eq!(summary["deadlock"], false);
    assert_eq!(summary["violations"], 0);
    let trace = fs::read_to_string(d.path().join("t.jsonl")).unwrap();
    let recount = trace
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|r| r["interaction"].as_array().is_some_and(|ps| ps.iter().any(|p| p == "monitor.pr")))
        .count();
    assert!(recount > 0);
    assert_eq!(summary["rollbacks"].as_u64().unwrap() as usize, recount);
    // same seed, same summary
    assert_eq!(json(&run_in(d.path(), &args)), summary);
}

#[test]
fn unsupervised_lexicographic_run_deadlocks() {
    let d = tempfile::tempdir().unwrap();
    philosophers(d.path());
    let out = run_in(d.path(), &["run", "philosophers-2.model.json", "--lex"]);
    let v = json(&out);
    assert_eq!(v["deadlock"], true);
    assert!(v["steps"].as_u64().unwrap() <= 4);
}

#[test]
fn check_passes_and_mutant_fails() {
    let d = tempfile::tempdir().unwrap();
    philosophers(d.path());
    let ok = run_in(d.path(), &["check", "philosophers-2.model.json", "philosophers-2.oracle.json", "--disabler"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = run_in(d.path(), &["check", "philosophers-2.model.json", "philosophers-2.oracle.json", "--no-backup"]);
    assert_eq!(bad.status.code(), Some(4));
    let v = json(&bad);
    assert_eq!(v["propositions"]["containment"], false);
    assert!(!v["violations"][0]["trace"].as_array().unwrap().is_empty());
}

#[test]
fn robots_bench_and_usage_errors() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["gen-bench", "robots", "3", "5", "-o", "out"]);
    assert!(out.status.success());
    assert!(d.path().join("out/robots-3-5.model.json").exists());
    assert_eq!(run_in(d.path(), &["gen-bench", "philosophers", "1"]).status.code(), Some(2));
    assert_eq!(run_in(d.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run_in(d.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run_in(d.path(), &["validate", "missing.json"]).status.code(), Some(1));
}
