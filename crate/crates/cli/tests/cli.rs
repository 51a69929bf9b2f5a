use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use consensus_lab_cli::config::{MapSpec, ProbeSettings, ScheduleSpec};
use consensus_lab_cli::{cmd_connectivity, cmd_probe, CliError};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_consensus-lab"));
    c.env_remove("CONSENSUS_LAB_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_pair_reaches_consensus_in_one_step() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "pair.txt", "n=2\narc 1 2\narc 2 1\n");
    let csv = dir.path().join("t.csv");
    let sum = dir.path().join("s.json");
    let o = run(&[
        "simulate",
        "--graph",
        &g,
        "--x0",
        "0,1",
        "--steps",
        "1",
        "--t0",
        "5",
        "--csv",
        csv.to_str().unwrap(),
        "--summary",
        sum.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<String> = fs::read_to_string(&csv).unwrap().lines().map(String::from).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("5,") && rows[1].contains(",1.0000000000000000e0,true,"));
    assert!(rows[2].starts_with("6,") && rows[2].contains(",0.0000000000000000e0,true,"));
    let s = json(&sum);
    assert_eq!(s["consensus_time"], 6);
    assert_eq!(s["violations"], 0);
}

#[test]
fn simulate_counterexample_never_agrees() {
    let dir = TempDir::new().unwrap();
    let sum = dir.path().join("s.json");
    let o = run(&[
        "simulate",
        "--scenario",
        "counterexample",
        "--x0",
        "0 1 1",
        "--steps",
        "5000",
        "--summary",
        sum.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = json(&sum);
    assert!(s.get("consensus_time").is_none());
    assert!(s["final_disagreement"].as_f64().unwrap() > 0.25);
}

#[test]
fn missing_graph_file_names_the_path() {
    let o = run(&["simulate", "--graph", "/nonexistent/g.txt", "--steps", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/g.txt"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "chain.txt", "n=3\narc 1 2\narc 2 3\n");
    let cfg = write(&dir, "run.cfg", &format!("graph={g}\nx0=0,1,2\nsteps=50\n"));
    let sum = dir.path().join("s.json");
    let o = run(&["simulate", "--config", &cfg, "--steps", "3", "--summary", sum.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&sum)["steps"], 3);

    let bad = write(&dir, "bad.cfg", "graph = chain.txt\nthis line is broken\n");
    assert_eq!(run(&["simulate", "--config", &bad]).status.code(), Some(1));
    let unknown = write(&dir, "unknown.cfg", &format!("graph={g}\nsteps=3\nstpes=4\n"));
    assert_eq!(run(&["simulate", "--config", &unknown]).status.code(), Some(1));
}

#[test]
fn runs_are_byte_identical_and_seeded_from_env() {
    let dir = TempDir::new().unwrap();
    let csv = |name: &str, seed_env: Option<&str>, seed_flag: Option<&str>| {
        let p = dir.path().join(name);
        let mut c = bin();
        c.args([
            "simulate",
            "--scenario",
            "windowed:n=4,T=2,seed=3",
            "--map",
            "kuramoto",
            "--substeps",
            "10",
        ]);
        c.args(["--x0", "random:-1,1", "--steps", "40", "--csv", p.to_str().unwrap()]);
        if let Some(s) = seed_env {
            c.env("CONSENSUS_LAB_SEED", s);
        }
        if let Some(s) = seed_flag {
            c.args(["--seed", s]);
        }
        assert_eq!(c.output().unwrap().status.code(), Some(0));
        fs::read(p).unwrap()
    };
    let a = csv("a.csv", Some("11"), None);
    let b = csv("b.csv", Some("11"), None);
    let c = csv("c.csv", None, Some("11"));
    let d = csv("d.csv", Some("12"), Some("11"));
    let e = csv("e.csv", Some("12"), None);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a, d);
    assert_ne!(a, e);
    let mut bad = bin();
    bad.env("CONSENSUS_LAB_SEED", "lots");
    bad.args(["simulate", "--scenario", "counterexample", "--steps", "2"]);
    assert_eq!(bad.output().unwrap().status.code(), Some(1));
}

#[test]
fn connectivity_reports() {
    let dir = TempDir::new().unwrap();
    let chain = write(&dir, "chain.txt", "n=3\narc 1 2\narc 2 3\n");
    let o = run(&["connectivity", "--graph", &chain]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("weakly_connected=true root=1 bidirectional=false"));
    assert!(text.contains("agree=true"));

    let empty = write(&dir, "empty.txt", "n=2\n");
    let o = run(&["connectivity", "--graph", &empty]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("weakly_connected=false"));

    let o = run(&["connectivity", "--scenario", "counterexample", "--from", "1", "--to", "4"]);
    assert!(stdout(&o).starts_with("weakly_connected=true"));
    // unbounded unions need a repeating tail
    assert_eq!(run(&["connectivity", "--scenario", "counterexample"]).status.code(), Some(1));
    assert_eq!(
        run(&["connectivity", "--scenario", "counterexample", "--from", "0", "--to", "3"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["connectivity", "--scenario", "counterexample", "--from", "4", "--to", "3"]).status.code(),
        Some(1)
    );
}

#[test]
fn connectivity_over_a_schedule_file() {
    let dir = TempDir::new().unwrap();
    let s = write(&dir, "s.txt", "n=3\nperiodic\nstep\narc 1 2\nstep\nstep\narc 2 3\n");
    let mut out = Vec::new();
    let spec = ScheduleSpec::File(s.into());
    let first = cmd_connectivity(&spec, Some(0), Some(1), &mut out).unwrap();
    assert!(!first.weakly_connected);
    let all = cmd_connectivity(&spec, Some(0), None, &mut out).unwrap();
    assert!(all.weakly_connected);
    assert_eq!(all.root, Some(1));
    assert!(!all.bidirectional);
}

#[test]
fn counterexample_table() {
    let o = run(&["counterexample", "--p-max", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> =
        text.lines().filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit())).collect();
    assert_eq!(rows.len(), 10);
    for row in &rows {
        let residual: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(residual < 1e-12);
    }
    let v10: f64 = rows[9].split(',').nth(2).unwrap().parse().unwrap();
    assert!((v10 - 0.2888).abs() < 1e-3);

    let two = stdout(&run(&["counterexample", "--p-max", "2"]));
    assert!(two.contains("\n1,2,0.50000000000000000,"));
    assert!(two.contains("\n2,4,0.37500000000000000,"));
    assert_eq!(run(&["counterexample", "--p-max", "1"]).status.code(), Some(1));
}

#[test]
fn matrix_command() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "ex.txt", "n=4\narc 2 1 1/2\narc 1 2 1\narc 3 2 5\n");
    let o = run(&["matrix", "--graph", &g]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("# rational\n2/3 1/3 0 0\n1/7 1/7 5/7 0\n0 0 1 0\n0 0 0 1\n"));

    let empty = write(&dir, "empty.txt", "n=3\n");
    assert!(stdout(&run(&["matrix", "--graph", &empty])).contains("# rational\n1 0 0\n0 1 0\n0 0 1\n"));

    let out_of_bounds = write(&dir, "oob.txt", "n=2\nbounds 1 2\narc 1 2 3\n");
    let o = run(&["matrix", "--graph", &out_of_bounds]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(1,2)"));

    let garbage = write(&dir, "garbage.txt", "n=2\narc 1 x\n");
    assert_eq!(run(&["matrix", "--graph", &garbage]).status.code(), Some(1));
}

#[test]
fn monitor_violation_exit_code_is_reserved() {
    assert_eq!(CliError::Verification("x".into()).exit_code(), 2);
    assert_eq!(CliError::Config("x".into()).exit_code(), 1);
}

#[test]
fn probe_is_independent_of_thread_count() {
    let settings = |jobs| ProbeSettings {
        schedule: ScheduleSpec::Scenario("windowed:n=4,T=1,seed=5".into()),
        map: MapSpec { name: "linear".into(), substeps: 100, gain: "tanh".into() },
        dim: 1,
        center: None,
        radius: 1.0,
        samples: 12,
        t0: None,
        horizon: 400,
        tol: 1e-6,
        seed: 21,
        jobs,
        out: None,
    };
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let one = cmd_probe(&settings(1), &mut a).unwrap();
    let four = cmd_probe(&settings(4), &mut b).unwrap();
    assert_eq!(a, b);
    assert_eq!(one.converged_fraction, 1.0);
    assert_eq!(four.samples, 12);

    let o =
        run(&["probe", "--scenario", "counterexample", "--samples", "3", "--horizon", "200", "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["samples"], 3);
    assert_eq!(run(&["probe", "--scenario", "counterexample", "--jobs", "0"]).status.code(), Some(1));
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["connectivity"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--scenario", "warp:n=3", "--steps", "2"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
