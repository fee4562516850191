use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const HEAD_ON: &str = r#"{"version": 1, "id": "head_on",
    "initial": {"atoms": [[0.5, 0.0, 1.0], [0.5, 1.0, -1.0]]},
    "times": [0.0, 0.25, 0.5, 1.0], "seed": 1}"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_adhesion1d"));
    c.env_remove("ADHESION1D_OUT");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_passes_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "head_on.json", HEAD_ON);
    let out = dir.path().join("out");
    let o = run(&["verify", "--scenario", s(&sc), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(out.join("head_on/report.json").exists());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("head_on/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scenario_id"], "head_on");
}

#[test]
fn failed_check_exits_one() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        dir.path(),
        "sine.json",
        r#"{"version": 1, "id": "sine", "initial": {"family": {"name": "sine", "n": 40}}, "times": [0.1, 0.3]}"#,
    );
    let out = dir.path().join("out");
    // round-off alone exceeds a zero tolerance
    let o = run(&["verify", "--scenario", s(&sc), "--out", s(&out), "--suite", "equivalence", "--tol", "0"]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&run(&["verify", "--scenario", s(&sc), "--out", s(&out), "--tol", "-1"])), 2);
    assert_eq!(code(&run(&["verify", "--scenario", s(&sc), "--out", s(&out), "--tol=-1"])), 2);
    assert_eq!(code(&run(&["verify", "--scenario", s(&sc), "--out", s(&out), "--tol", "NaN"])), 2);
}

#[test]
fn input_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&run(&["run", "--scenario", s(&missing), "--out", s(&out)])), 2);
    let broken = write(dir.path(), "broken.json", "{\"version\": 1,");
    assert_eq!(code(&run(&["run", "--scenario", s(&broken), "--out", s(&out)])), 2);
    let sc = write(dir.path(), "head_on.json", HEAD_ON);
    assert_eq!(code(&run(&["verify", "--scenario", s(&sc), "--out", s(&out), "--suite", "magic"])), 2);
    assert_eq!(code(&run(&["verify", "--scenario", s(&sc), "--bogus"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn corrupted_velocity_column_is_rejected() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "atoms.csv", "m,x,v\n0.5,0.0,1.0\n0.5,1.0,fast\n");
    let sc = write(
        dir.path(),
        "bad.json",
        r#"{"version": 1, "id": "bad", "initial": {"csv": "atoms.csv"}, "times": [0.5]}"#,
    );
    let o = run(&["run", "--scenario", s(&sc), "--out", s(&dir.path().join("out"))]);
    assert_ne!(code(&o), 0);
    assert_eq!(code(&o), 2);
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn empty_times_give_header_only_tables() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "e.json", &HEAD_ON.replace("[0.0, 0.25, 0.5, 1.0]", "[]"));
    let out = dir.path().join("out");
    assert_eq!(code(&run(&["run", "--scenario", s(&sc), "--out", s(&out)])), 0);
    assert_eq!(fs::read_to_string(out.join("head_on/trajectory.csv")).unwrap(), "t,cluster_id,m,x,v\n");
    assert_eq!(fs::read_to_string(out.join("head_on/events.csv")).unwrap(), "t,first_index,last_index,post_velocity\n");
}

#[test]
fn renormalize_flag() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "r.json", &HEAD_ON.replace("[0.5, 1.0, -1.0]", "[0.4, 1.0, -1.0]"));
    let out = dir.path().join("out");
    assert_eq!(code(&run(&["run", "--scenario", s(&sc), "--out", s(&out)])), 2);
    assert_eq!(code(&run(&["run", "--scenario", s(&sc), "--out", s(&out), "--renormalize"])), 0);
    let traj = fs::read_to_string(out.join("head_on/trajectory.csv")).unwrap();
    let first: Vec<&str> = traj.lines().nth(1).unwrap().split(',').collect();
    assert!((first[2].parse::<f64>().unwrap() - 5.0 / 9.0).abs() < 1e-12);
}

#[test]
fn runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "head_on.json", HEAD_ON);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(code(&run(&["run", "--scenario", s(&sc), "--out", s(out)])), 0);
        assert_eq!(code(&run(&["entropy", "--scenario", s(&sc), "--out", s(out)])), 0);
    }
    for name in ["trajectory.csv", "events.csv", "snapshots.csv", "cdf_godunov_dx400.csv", "manifest.json"] {
        let x = fs::read(a.join("head_on").join(name)).unwrap();
        assert_eq!(x, fs::read(b.join("head_on").join(name)).unwrap(), "{name}");
    }
}

#[test]
fn suite_filter_and_json_format() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "head_on.json", HEAD_ON);
    let o = run(&["verify", "--scenario", s(&sc), "--out", s(&dir.path().join("out")), "--suite", "cone", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let records: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!records.is_empty());
    assert!(records.iter().all(|r| r["check"].as_str().unwrap().starts_with("cone.")));
}

#[test]
fn out_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "head_on.json", HEAD_ON);
    let out = dir.path().join("from_env");
    let o = bin().args(["run", "--scenario", s(&sc)]).env("ADHESION1D_OUT", &out).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(out.join("head_on/trajectory.csv").exists());
}

#[test]
fn scenario_directory_with_jobs() {
    let dir = TempDir::new().unwrap();
    let scenarios = dir.path().join("sc");
    fs::create_dir(&scenarios).unwrap();
    write(&scenarios, "a.json", HEAD_ON);
    write(&scenarios, "b.json", &HEAD_ON.replace("head_on", "other"));
    let out = dir.path().join("out");
    let o = run(&["verify", "--scenario", s(&scenarios), "--out", s(&out), "--jobs", "2", "--seed", "5"]);
    assert_eq!(code(&o), 0);
    assert!(out.join("head_on/report.json").exists() && out.join("other/report.json").exists());
}

#[test]
fn bundled_scenarios_pass_every_command() {
    let scenarios = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let dir = TempDir::new().unwrap();
    for cmd in ["verify", "entropy", "gradflow"] {
        let o = run(&[cmd, "--scenario", s(&scenarios), "--out", s(dir.path())]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stdout));
    }
}
