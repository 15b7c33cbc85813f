use std::path::Path;
use std::process::{Command, Output};

use triwalk_core::footstep::{obstacle_course, FootstepPlan};
use triwalk_core::harness::{RunSummary, Scenario};

fn triwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triwalk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn example_writes_a_loadable_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pushed.json");
    let out = triwalk(&[
        "example",
        "pushed",
        "--force",
        "120",
        "--out",
        path_str(&file),
    ]);
    assert!(out.status.success());
    let s = Scenario::load(&file).unwrap();
    assert_eq!(s, Scenario::pushed(120.0, 0));
}

#[test]
fn run_reports_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("tracking.json");
    Scenario::tracking().save(&file).unwrap();
    let traces = dir.path().join("out");
    let out = triwalk(&["run", path_str(&file), "--out", path_str(&traces)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("completed       true"));
    let summary: RunSummary =
        serde_json::from_str(&std::fs::read_to_string(traces.join("tracking.json")).unwrap())
            .unwrap();
    assert!(summary.survived());
    assert!(traces.join("tracking.csv").exists());
}

#[test]
fn fall_gives_a_failing_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("hard.json");
    let mut s = Scenario::pushed(3000.0, 0);
    s.duration = 3.0;
    s.save(&file).unwrap();
    let out = triwalk(&["run", path_str(&file)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn plan_writes_footsteps() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("map.json");
    let plan = dir.path().join("plan.json");
    obstacle_course().save(&map).unwrap();
    let out = triwalk(&["plan", path_str(&map), "--out", path_str(&plan)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let plan: FootstepPlan = serde_json::from_str(&std::fs::read_to_string(plan).unwrap()).unwrap();
    assert!(!plan.steps.is_empty());
}

#[test]
fn errors_exit_with_two() {
    let out = triwalk(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("tracking.json");
    Scenario::tracking().save(&file).unwrap();
    let out = triwalk(&[
        "withstand",
        path_str(&file),
        "--direction",
        "fwd",
        "--low",
        "0",
        "--high",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
