use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_burkholder")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn constants_p2_is_trivial() {
    let out = run(&["constants", "--p", "2", "--d", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!(v["z0"].as_f64().unwrap().abs() <= 1e-12);
    assert_eq!(v["C_pd"].as_f64().unwrap(), 1.0);
    assert_eq!(v["status"], "ok");
}

#[test]
fn constants_legendre_p6() {
    let out = run(&["constants", "--p", "6", "--d", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let c = stdout_json(&out)["C_pd"].as_f64().unwrap();
    assert!((c - (2.0 + 3f64.sqrt())).abs() < 1e-8);
}

#[test]
fn constants_exit_codes() {
    let out = run(&["constants", "--p", "0.4", "--d", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["status"], "no-finite-constant");
    assert_eq!(run(&["constants", "--p", "1", "--d", "0.5"]).status.code(), Some(1));
    assert_eq!(run(&["constants", "--p=-1", "--d", "2"]).status.code(), Some(1));
    assert_eq!(run(&["constants", "--p", "x"]).status.code(), Some(1));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn constants_dump_series() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.json");
    let out = run(&["constants", "--p", "1.5", "--d", "3", "--dump-series", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["coeffs"][0].as_f64(), Some(-1.0));
}

#[test]
fn table_rows_are_d_major() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let out = run(&["table", "--p", "2", "--d", "2,3,5", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,d,z0,C_pd,c,s1,z1,status");
    assert_eq!(lines.len(), 4);
    for (line, d) in lines[1..].iter().zip(["2", "3", "5"]) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], d);
        assert_eq!(f[3], "1");
        assert_eq!(f[7], "ok");
    }

    let out = run(&["table", "--p", "6,12", "--d", "2,3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let ds: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    let ps: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ds, ["2", "2", "3", "3"]);
    assert_eq!(ps, ["6", "12", "6", "12"]);
    let c6: f64 = text.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!((c6 - (2.0 + 3f64.sqrt())).abs() < 1e-8);
}

#[test]
fn table_invalid_row_and_bad_path() {
    let out = run(&["table", "--p", "1.9", "--d", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "1.8999999999999999,0.5,,,,,,invalid-params");

    let out = run(&["table", "--p", "2", "--d", "2", "--out", "/nonexistent-dir/t.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(&["table", "--p", "", "--d", "2"]).status.code(), Some(1));
}

#[test]
fn table_json_and_range_syntax() {
    let out = run(&["table", "--p", "1:3:3", "--d", "2", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let ps: Vec<f64> = v.as_array().unwrap().iter().map(|b| b["params"]["p"].as_f64().unwrap()).collect();
    assert_eq!(ps, [1.0, 2.0, 3.0]);
}

fn verify_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn verify_passes_on_known_cases() {
    for args in [
        vec!["verify", "--p", "2", "--d", "2"],
        vec!["verify", "--p", "3", "--d", "2", "--grid-n", "2001", "--tol", "1e-9"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(verify_lines(&out).iter().all(|r| r["pass"] == true));
    }
    let out = run(&["verify", "--p", "0.9", "--d", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(verify_lines(&out).iter().any(|r| r["check_id"] == "z1_tangency"));
}

#[test]
fn verify_filter_and_failure_code() {
    let out = run(&["verify", "--p", "3", "--d", "2", "--checks", "maj,part2"]);
    let ids: Vec<String> = verify_lines(&out).iter().map(|r| r["check_id"].as_str().unwrap().to_string()).collect();
    assert_eq!(ids, ["maj", "part2"]);
    // A negative tolerance demands a positive margin, which the equality cases cannot meet.
    let out = run(&["verify", "--p", "3", "--d", "2", "--tol=-1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!verify_lines(&out).is_empty());
    assert_eq!(run(&["verify", "--p", "0.4", "--d", "1.5"]).status.code(), Some(2));
}

#[test]
fn simulate_degenerate_start_and_manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.json");
    let args = [
        "simulate", "bessel", "--p", "1", "--d", "3", "--a", "0.2", "--x0", "1", "--y0", "2", "--paths", "64",
        "--dt", "1e-3", "--t-max", "1", "--seed", "5", "--out", path.to_str().unwrap(),
    ];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["n_stopped"], 64);
    assert_eq!(v["mean_tau"]["value"].as_f64(), Some(0.0));
    assert!((v["ratio"]["value"].as_f64().unwrap() - 2.0).abs() < 1e-14);

    let manifest_path = dir.path().join("sim.json.manifest.json");
    let m: Value = serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    let digest = m["outputs"][0]["sha256"].as_str().unwrap().to_string();
    assert_eq!(m["seeds"][0], 5);
    let replay: Vec<String> = m["command_line"].as_array().unwrap().iter().map(|a| a.as_str().unwrap().into()).collect();
    fs::remove_file(&path).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_burkholder")).args(&replay).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let m2: Value = serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(m2["outputs"][0]["sha256"].as_str().unwrap(), digest);
}

#[test]
fn simulate_is_thread_count_invariant() {
    let base = ["simulate", "bessel", "--p", "3", "--d", "2", "--a", "0.5", "--paths", "200", "--dt", "1e-3"];
    let one = run(&[&base[..], &["--t-max", "1", "--threads", "1"]].concat());
    let three = run(&[&base[..], &["--t-max", "1", "--threads", "3"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn simulate_diverged_paths_exit_4() {
    let out = run(&[
        "simulate", "bessel", "--p", "1", "--d", "3", "--a", "0.5", "--x0", "1e-320", "--y0", "1e-320", "--paths",
        "4", "--dt", "1e-3", "--t-max", "1",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stdout_json(&out)["n_diverged"], 4);
}

#[test]
fn simulate_twostep_and_hp() {
    let out = run(&[
        "simulate", "twostep", "--p", "3", "--d", "2", "--b", "-0.5", "--paths", "100", "--dt", "1e-3", "--t-max",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["ratio_kind"], "R/S");
    assert_eq!(run(&["simulate", "twostep", "--p", "1", "--d", "3"]).status.code(), Some(1));

    let out = run(&["simulate", "hp", "--pair", "z2half", "--p", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["ratio"].as_f64().unwrap() - 0.5).abs() <= 1e-10);
    assert_eq!(v["pass"], true);
    assert_eq!(run(&["simulate", "hp", "--pair", "nope", "--p", "4"]).status.code(), Some(1));
}
