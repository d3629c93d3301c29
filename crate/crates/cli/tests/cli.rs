use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smalleig"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("smalleig-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn simulate_writes_rows_and_is_reproducible() {
    let dir = scratch("sim");
    let csv = dir.join("r.csv");
    let args = [
        "simulate", "--kind", "circulant", "--p", "100", "--n", "1000", "--reps", "10", "--seed", "1",
        "--out", csv.to_str().unwrap(),
    ];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("cells=1 reps=10 rows=10"), "{summary}");
    let first = fs::read(&csv).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert_eq!(text.lines().next().unwrap(), "kind,p,n,rep,seed,lambda_min,solver,iters,residual,bound,wall_ms");

    assert_eq!(run(&args).status.code(), Some(0));
    assert_eq!(fs::read(&csv).unwrap(), first);
}

#[test]
fn simulate_thread_count_does_not_change_output() {
    let dir = scratch("threads");
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    let base = ["simulate", "--kind", "toeplitz", "--p", "20,30", "--ratio", "3", "--reps", "40", "--seed", "5"];
    let mut one = base.to_vec();
    one.extend(["--threads", "1", "--out", a.to_str().unwrap()]);
    assert_eq!(run(&one).status.code(), Some(0));
    let out = bin()
        .args(base)
        .args(["--out", b.to_str().unwrap()])
        .env("SMALLEIG_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn simulate_rejects_p_above_n() {
    let dir = scratch("bad");
    let out = run(&["simulate", "--p", "100", "--n", "50", "--reps", "1", "--out", dir.join("x.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p must not exceed n"));
}

#[test]
fn unknown_flags_and_values_are_validation_errors() {
    assert_eq!(run(&["simulate", "--p", "4", "--ratio", "2", "--frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--p", "4", "--ratio", "2", "--kind", "hankel", "--out", "x"]).status.code(), Some(1));
    assert_eq!(run(&["check", "--suite", "everything"]).status.code(), Some(1));
    assert_eq!(run(&["nonsense"]).status.code(), Some(1));
}

#[test]
fn io_failures_exit_2() {
    let dir = scratch("io");
    let missing = dir.join("missing.csv");
    assert_eq!(run(&["regress", "--in", missing.to_str().unwrap()]).status.code(), Some(2));
    let blocker = dir.join("file");
    fs::write(&blocker, "x").unwrap();
    let under_file = blocker.join("r.csv");
    let out = run(&["simulate", "--p", "4", "--ratio", "2", "--out", under_file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_lists_flags_with_defaults() {
    let out = run(&["simulate", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for flag in ["--kind", "--p", "--n", "--ratio", "--reps", "--seed", "--solver", "--bound", "--out", "--threads", "--resume"] {
        assert!(text.contains(flag), "{flag}");
    }
    for default in ["[default: circulant]", "[default: 1]", "[default: auto]", "[default: 0.5]", "[default: practical]"] {
        assert!(text.contains(default), "{default}");
    }
    assert!(text.contains("SMALLEIG_THREADS"));
}

#[test]
fn bound_impulse_is_tight() {
    let out = run(&["bound", "--p", "64", "--n", "256", "--trials", "1", "--signal", "impulse"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let t = &v["trials"][0];
    let lambda = t["lambda_min"].as_f64().unwrap();
    let bound = t["bound"].as_f64().unwrap();
    assert!((lambda - 1.0 / 256.0).abs() < 1e-14);
    assert!((bound - 1.0 / 256.0).abs() < 1e-14);
    assert!((t["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn bound_has_no_violations() {
    let out = run(&["bound", "--p", "64", "--n", "256", "--trials", "100", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["violations"].as_u64(), Some(0));
    assert_eq!(v["trials"].as_array().unwrap().len(), 100);
    assert!(v["max_ratio"].as_f64().unwrap() >= 1.0);
}

#[test]
fn bound_validation() {
    assert_eq!(run(&["bound", "--p", "64", "--n", "256", "--beta", "0"]).status.code(), Some(1));
    assert_eq!(run(&["bound", "--p", "64", "--n", "256", "--beta", "-1", "--mode", "theorem"]).status.code(), Some(1));
    // n too short for one shift window
    assert_eq!(run(&["bound", "--p", "8", "--n", "8"]).status.code(), Some(1));
}

#[test]
fn regress_recovers_power_law() {
    let dir = scratch("regress");
    let csv = dir.join("synthetic.csv");
    let mut text = String::from("kind,p,n,rep,seed,lambda_min,solver,iters,residual,bound,wall_ms\n");
    for i in 1..=7 {
        let p = 100 * i;
        let q = 2.0 * (p as f64).powf(-0.3);
        text.push_str(&format!("circulant,{p},{},0,0,{q},dense,0,0,,\n", 5 * p));
    }
    fs::write(&csv, text).unwrap();
    let out = run(&["regress", "--in", csv.to_str().unwrap(), "--quantile", "50"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let fit = &v["fits"][0]["fit"];
    assert!((fit["slope"].as_f64().unwrap() + 0.3).abs() < 1e-12);
    assert!((fit["intercept"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-11);
    assert_eq!(v["fits"][0]["ratio"], "5");
}

#[test]
fn simulate_then_regress_round_trip() {
    let dir = scratch("pipeline");
    let csv = dir.join("r.csv");
    let out = run(&[
        "simulate", "--p", "16,24,32", "--ratio", "4", "--reps", "30", "--bound", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let lambda: f64 = cols[5].parse().unwrap();
        let bound: f64 = cols[9].parse().unwrap();
        assert!(bound >= lambda - 1e-9);
    }
    let out = run(&["regress", "--in", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["fits"][0]["fit"]["points"].as_u64(), Some(3));
}

#[test]
fn simulate_from_config_file() {
    let dir = scratch("config");
    let cfg = dir.join("exp.cfg");
    fs::write(&cfg, format!("kind = toeplitz\np_list = 10,20\nratio = 2\nreps = 5\nseed = 3\nout_dir = {}\nout = t.csv\n", dir.display()))
        .unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(dir.join("t.csv")).unwrap().lines().count(), 11);
    let clash = run(&["simulate", "--config", cfg.to_str().unwrap(), "--p", "5"]);
    assert_eq!(clash.status.code(), Some(1));
}

#[test]
fn figures_write_csv_and_svg() {
    let dir = scratch("figs");
    let out = run(&[
        "figures", "--fig", "1", "--kind", "circulant", "--p", "100", "--ratio", "10", "--reps", "500",
        "--out-dir", dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.join("fig1_circulant_10.csv");
    let svg = dir.join("fig1_circulant_10.svg");
    assert!(csv.exists() && svg.exists());
    let first = fs::read(&svg).unwrap();

    let again = run(&[
        "figures", "--fig", "1", "--kind", "circulant", "--p", "100", "--ratio", "10", "--reps", "500",
        "--out-dir", dir.to_str().unwrap(),
    ]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(fs::read(&svg).unwrap(), first);

    let out = run(&[
        "figures", "--fig", "3", "--kind", "toeplitz", "--p", "10,20,30", "--ratio", "2,3", "--reps", "20",
        "--out-dir", dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("fig3_toeplitz_2.svg").exists() && dir.join("fig3_toeplitz_3.csv").exists());
    let wrong = run(&["figures", "--fig", "2", "--kind", "toeplitz", "--p", "10,20", "--ratio", "2", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(wrong.status.code(), Some(1));
    assert_eq!(run(&["figures", "--fig", "4", "--p", "10", "--ratio", "2"]).status.code(), Some(1));
}

#[test]
fn check_lemmas_passes() {
    let out = run(&["check", "--suite", "lemmas"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], true);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    for c in checks {
        assert_eq!(c["pass"], true, "{c}");
        for key in ["check_name", "parameters", "statistic", "threshold"] {
            assert!(c.get(key).is_some());
        }
    }
}
