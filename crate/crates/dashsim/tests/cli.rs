mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn dashsim(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dashsim"));
    cmd.args(args).current_dir(common::root()).env_remove("OPENAI_API_KEY");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(stdout(o).trim()).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CONFIG: &str = "dashsim.toml";

#[test]
fn validate_reports_diagnostics() {
    let ok = dashsim(&["validate", "fixtures/script/ped_crossing/script.scenic"], &[]);
    assert_eq!(code(&ok), 0);
    assert!(stdout(&ok).ends_with(": ok\n"));

    let path = "crates/core/tests/negative/unknown_class.scenic";
    let bad = dashsim(&["validate", path], &[]);
    assert_eq!(code(&bad), 1);
    assert!(stdout(&bad).contains("error[CATALOG_UNKNOWN_CLASS]"), "{}", stdout(&bad));

    let bad = dashsim(&["--json", "validate", path], &[]);
    assert_eq!(code(&bad), 1);
    let first: Value = serde_json::from_str(stdout(&bad).lines().next().unwrap()).unwrap();
    assert_eq!(first["code"], "CATALOG_UNKNOWN_CLASS");

    assert_eq!(code(&dashsim(&["validate", "nope.scenic"], &[])), 4);
}

#[test]
fn similarity_exit_codes() {
    let a = "fixtures/feature/ped_crossing/features.json";
    let b = "fixtures/feature/highway_cruising/features.json";
    let same = dashsim(&["--json", "similarity", a, a], &[]);
    assert_eq!(code(&same), 0);
    assert_eq!(json(&same)["passed"], true);

    let differ = dashsim(&["--json", "similarity", a, b], &[]);
    assert_eq!(code(&differ), 1);
    assert_eq!(json(&differ)["passed"], false);
    let human = dashsim(&["similarity", a, b], &[]);
    assert_eq!(code(&human), 1);
    assert!(stdout(&human).contains("VIOLATION"));

    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.json");
    fs::write(&short, r#"{"taxonomy_version":"driving-10/v1","values":[0.5,0.5]}"#).unwrap();
    assert_eq!(code(&dashsim(&["similarity", a, s(&short)], &[])), 2);
    assert_eq!(code(&dashsim(&["similarity", a, "missing.json"], &[])), 4);
}

fn convert(out: &Path, video: &str, env: &[(&str, &str)]) -> Output {
    dashsim(&["--json", "--config", CONFIG, "convert", video, "--out", s(out)], env)
}

#[test]
fn convert_resume_variations_report() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    let o = convert(&runs, "fixtures/videos/highway_rain_cut_in.mockvid", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["outcome"], "accepted");
    assert_eq!(v["iterations"], 2);
    let run = PathBuf::from(v["run_dir"].as_str().unwrap());
    assert!(run.join("iter_02/script.scenic").is_file());

    let r = dashsim(&["--json", "resume", s(&run)], &[]);
    assert_eq!(code(&r), 0);
    assert_eq!(json(&r)["outcome"], "accepted");

    let var = dashsim(&["--json", "variations", s(&run), "--count", "2"], &[]);
    assert_eq!(code(&var), 0);
    assert_eq!(json(&var).as_array().unwrap().len(), 2);
    assert_eq!(code(&dashsim(&["variations", s(&run), "--count", "0"], &[])), 2);

    let rep = dashsim(&["--json", "report", s(&runs)], &[]);
    assert_eq!(code(&rep), 0);
    let rep = json(&rep);
    assert_eq!(rep["total_runs"], 1);
    assert_eq!(rep["refinement_rate"], 1.0);
    let human = dashsim(&["report", &format!("{}/*", runs.display())], &[]);
    assert!(stdout(&human).contains("1 (100.0%)"), "{}", stdout(&human));
}

#[test]
fn failed_runs_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = convert(&dir.path().join("runs"), "fixtures/videos/highway_rain_cut_in.mockvid", &[
        ("DASHSIM_GATEWAY__MOCK_MODE", "stall"),
        ("DASHSIM_LOOP__MAX_ITERATIONS", "2"),
    ]);
    assert_eq!(code(&o), 3);
    let v = json(&o);
    assert_eq!(v["outcome"], "budget_exhausted");
    assert_eq!(v["iterations"], 2);
    let run = v["run_dir"].as_str().unwrap();
    assert_eq!(code(&dashsim(&["variations", run, "--count", "1"], &[])), 3);
}

#[test]
fn usage_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    // The live gateway without a credential stops before any request.
    let o = convert(&runs, "fixtures/videos/ped_crossing.mockvid", &[("DASHSIM_GATEWAY__BACKEND", "http")]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("OPENAI_API_KEY"));
    assert!(!runs.exists());

    assert_eq!(code(&convert(&runs, "fixtures/videos/absent.mockvid", &[])), 4);
    assert_eq!(code(&dashsim(&["--config", CONFIG, "convert", "x.mockvid"], &[("DASHSIM_LOOP__MAX_ITERATIONS", "0")])), 2);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[loop]\nmax_iterashuns = 2\n").unwrap();
    let o = dashsim(&["--config", s(&bad), "convert", "fixtures/videos/ped_crossing.mockvid"], &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("max_iterashuns"));
    assert_eq!(code(&dashsim(&["frobnicate"], &[])), 2);
    assert_eq!(code(&dashsim(&["report", s(&dir.path().join("empty"))], &[])), 4);
}

#[test]
fn batch_runs_every_video() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    let o = dashsim(
        &[
            "--json",
            "--config",
            CONFIG,
            "batch",
            "fixtures/videos/ped_crossing.mockvid",
            "fixtures/videos/moose_crossing.mockvid",
            "fixtures/videos/stopped_queue_dusk.mockvid",
            "--out",
            s(&runs),
            "--parallel",
            "2",
        ],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = json(&o);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[1]["video"].as_str().unwrap().ends_with("moose_crossing.mockvid"));
    assert!(rows.iter().all(|r| r["run"]["outcome"] == "accepted"));
    assert_eq!(fs::read_dir(&runs).unwrap().count(), 3);
}
