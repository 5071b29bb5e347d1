use std::path::Path;
use std::process::{Command, Output};

use eid_cloud::scenario::DEFAULT_SCENARIO;

fn eidcloud(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eidcloud"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn with_scenario(src: &str, backend: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.toml");
    std::fs::write(&path, src).unwrap();
    let o = eidcloud(dir.path(), &["setup", "--scenario", path.to_str().unwrap(), "--backend", backend]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

#[test]
fn run_writes_trace_observations_and_outcomes() {
    let dir = with_scenario(DEFAULT_SCENARIO, "pairing");
    let o = eidcloud(dir.path(), &["run", "--use-case", "representation", "--mode", "cloud"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("granted"));
    let run = dir.path().join("runs/representation-cloud");
    for f in ["trace.jsonl", "observations.jsonl", "outcomes.jsonl"] {
        let text = std::fs::read_to_string(run.join(f)).unwrap();
        for line in text.lines() {
            serde_json::from_str::<serde_json::Value>(line).unwrap();
        }
    }
}

#[test]
fn audit_reports_pass_and_writes_json() {
    let dir = with_scenario(DEFAULT_SCENARIO, "pairing");
    let o = eidcloud(dir.path(), &["audit", "--use-case", "foreign", "--mode", "cloud"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("verdict: Pass"));
    let json = std::fs::read_to_string(dir.path().join("runs/foreign-cloud/audit.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["verdict"], "pass");
}

#[test]
fn a_leaking_actor_fails_the_audit() {
    let src = format!("{DEFAULT_SCENARIO}\n[leak]\nactor = \"MIS\"\nattribute = \"source_pin\"\n");
    let dir = with_scenario(&src, "pairing");
    let o = eidcloud(dir.path(), &["audit", "--use-case", "representation", "--mode", "cloud"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("violation at step"));
}

#[test]
fn the_test_double_is_refused() {
    let dir = with_scenario(DEFAULT_SCENARIO, "test-double");
    let o = eidcloud(dir.path(), &["run", "--use-case", "austrian", "--mode", "cloud"]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&eidcloud(dir.path(), &["audit", "--use-case", "austrian", "--mode", "cloud"])), 5);
    assert_eq!(code(&eidcloud(dir.path(), &["compare"])), 5);
}

#[test]
fn denials_and_usage_errors_have_their_own_codes() {
    let src = DEFAULT_SCENARIO.replace(
        "crr_number = \"000123456789\"",
        "crr_number = \"000123456789\"\nconsent = \"deny-signature\"",
    );
    let dir = with_scenario(&src, "pairing");
    let o = eidcloud(dir.path(), &["run", "--use-case", "austrian", "--mode", "current"]);
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("denied at step 4b"));
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&eidcloud(empty.path(), &["run", "--use-case", "austrian", "--mode", "cloud"])), 2);
}

#[test]
fn compare_prints_the_table() {
    let dir = with_scenario(DEFAULT_SCENARIO, "pairing");
    let o = eidcloud(dir.path(), &["compare"]);
    assert_eq!(code(&o), 0);
    let table = std::fs::read_to_string(dir.path().join("compare/table.txt")).unwrap();
    assert_eq!(stdout(&o).lines().next(), table.lines().next());
    assert!(table.contains("Cloud-based approach"));
}

#[test]
fn demos_run() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&eidcloud(dir.path(), &["demo-rs"])), 0);
    assert_eq!(code(&eidcloud(dir.path(), &["demo-pre", "--backend", "test-double"])), 0);
}
