//! End-to-end tests of the spiralctl binary: output formats, exit codes,
//! determinism, and the documented command semantics.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spiralctl"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn spiralctl")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().find(|l| l.starts_with('{')).expect("json line on stdout");
    serde_json::from_str(line).expect("valid json summary")
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("spiralctl-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn simulate_model_problem_hits_and_reports_cost() {
    let csv = tmp("sim.csv");
    let out = run(&["simulate", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["schema_version"], 1);
    let hit = v["hit"].as_f64().expect("hit time");
    assert!((hit - 1.0).abs() < 1e-3, "hit {hit}");
    // closed-form cost |A2|^2 T^5 / 5 = 1/270
    let cost = v["cost"].as_f64().unwrap();
    assert!((cost - 1.0 / 270.0).abs() < 1e-8, "cost {cost}");
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,x1,x2,y1,y2,u1,u2,phi1,phi2,psi1,psi2,x_norm,winding_u"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 13);
    // first row is t = 0 with ||u|| = 1
    assert_eq!(first[0], "0.0000000000000000e0");
    let u1: f64 = first[5].parse().unwrap();
    let u2: f64 = first[6].parse().unwrap();
    assert!((u1 * u1 + u2 * u2 - 1.0).abs() < 1e-12);
    std::fs::remove_file(&csv).ok();
}

#[test]
fn simulate_is_deterministic() {
    let a = tmp("det-a.csv");
    let b = tmp("det-b.csv");
    assert!(run(&["simulate", "--out", a.to_str().unwrap()]).status.success());
    assert!(run(&["simulate", "--out", b.to_str().unwrap()]).status.success());
    let ba = std::fs::read(&a).unwrap();
    let bb = std::fs::read(&b).unwrap();
    assert_eq!(ba, bb, "identical configs must produce identical bytes");
    std::fs::remove_file(&a).ok();
    std::fs::remove_file(&b).ok();
}

#[test]
fn simulate_zero_state_reports_immediate_hit() {
    let csv = tmp("zero.csv");
    let out = run(&[
        "simulate",
        "--z0",
        "1e-16,0,0,0,0,0,0,0",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["hit"].as_f64().unwrap(), 0.0);
    assert_eq!(v["stop"], "radius");
    std::fs::remove_file(&csv).ok();
}

#[test]
fn simulate_escaping_state_reports_null_hit() {
    // adjoint pointed away from the stable family: no hit, exit 0
    let out = run(&["simulate", "--z0", "1,0,1,0,1,0,1,0", "--max-time", "3"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!(v["hit"].is_null());
    assert_eq!(v["stop"], "escaped");
}

#[test]
fn simulate_blown_flag_appends_cylinder_columns() {
    let csv = tmp("blown.csv");
    let out = run(&["simulate", "--blown", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.ends_with("mu,zt11,zt12,zt21,zt22,zt31,zt32,zt41,zt42"));
    // mu at the first node equals the initial scale (1 for the standard seed)
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let mu: f64 = first[13].parse().unwrap();
    assert!((mu - 1.0).abs() < 1e-12);
    std::fs::remove_file(&csv).ok();
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(run(&["simulate", "--problem", "p1"]).status.code(), Some(2));
    assert_eq!(
        run(&["simulate", "--problem", "p1", "--k", "2,2", "--pendulum", "1,1,1,1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["simulate", "--problem", "p1", "--k", "0,2"]).status.code(), Some(2));
    let bad = tmp("bad.json");
    std::fs::write(&bad, "{\"problem\": \"p9\"}").unwrap();
    assert_eq!(
        run(&["simulate", "--config", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    std::fs::write(&bad, "not json").unwrap();
    assert_eq!(
        run(&["simulate", "--config", bad.to_str().unwrap()]).status.code(),
        Some(2)
    );
    std::fs::remove_file(&bad).ok();
}

#[test]
fn pendulum_parameters_set_the_gain() {
    // M = m = l = g = 1 gives stiffness 2 on both axes; the run must hit
    let out = run(&[
        "simulate",
        "--problem",
        "p1",
        "--pendulum",
        "1,1,1,1",
        "--t-star",
        "1",
        "--eps",
        "1e-3",
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let hit = v["hit"].as_f64().expect("perturbed run hits");
    assert!(hit > 0.5 && hit < 1.5, "hit {hit}");
}

#[test]
fn floquet_json_report() {
    let out = run(&["floquet", "--samples", "16"]);
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("pretty json on stdout");
    assert_eq!(v["schema_version"], 1);
    let report = &v["report"];
    assert!(report["constancy_residual"].as_f64().unwrap() < 1e-6);
    assert!(report["spectral_gap_to_reference"].as_f64().unwrap() < 1e-5);
    assert_eq!(report["classification"][0], 1);
    assert_eq!(report["classification"][1], 1);
    assert_eq!(report["classification"][2], 7);
    // more samples keep the residual small
    let out64 = run(&["floquet", "--samples", "64"]);
    let v64: serde_json::Value = serde_json::from_slice(&out64.stdout).unwrap();
    assert!(v64["report"]["constancy_residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn floquet_reference_matrix_bypass() {
    let out = run(&["floquet", "--reference-matrix"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["constancy_residual"].as_f64().unwrap(), 0.0);
    assert!(v["report"]["spectral_gap_to_reference"].as_f64().unwrap() < 1e-10);
}

#[test]
fn verify_passes_and_filters() {
    let out = run(&["verify"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("10 of 10 checks passed"), "got:\n{text}");
    let out = run(&["verify", "--only", "floquet"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("3 of 3 checks passed"), "got:\n{text}");
}

#[test]
fn sweep_scaling_family_and_single_point() {
    let csv = tmp("sweep.csv");
    let out = run(&[
        "sweep",
        "--lambdas",
        "1,2,4",
        "--threads",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut rows = text.lines();
    assert_eq!(
        rows.next().unwrap(),
        "lambda,zeta_angle,t_star,hit_time,hitting_ratio,cost,winding_u"
    );
    let hits: Vec<f64> = rows
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(hits.len(), 3);
    // linear scaling of hitting times under the weighted dilation
    assert!((hits[1] / (2.0 * hits[0]) - 1.0).abs() < 1e-3);
    assert!((hits[2] / (4.0 * hits[0]) - 1.0).abs() < 1e-3);

    // a single-point sweep reduces to the simulate hit
    let sim = stdout_json(&run(&["simulate"]));
    let single = tmp("single.csv");
    assert!(run(&["sweep", "--lambdas", "1", "--out", single.to_str().unwrap()])
        .status
        .success());
    let text = std::fs::read_to_string(&single).unwrap();
    let hit: f64 = text.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(hit, sim["hit"].as_f64().unwrap());
    std::fs::remove_file(&csv).ok();
    std::fs::remove_file(&single).ok();
}

#[test]
fn spiral_command_emits_the_family() {
    let csv = tmp("spiral.csv");
    let out = run(&["spiral", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    // A0 = -1/126
    let re = v["constants"][0]["re"].as_f64().unwrap();
    assert!((re + 1.0 / 126.0).abs() < 1e-15);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 513); // header + 512 rows
    std::fs::remove_file(&csv).ok();
}

#[test]
fn blowup_command_reports_the_decay_rate() {
    let out = run(&["blowup", "--problem", "p1", "--k", "2,2", "--s-span", "10"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let slope = v["log_mu_slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() < 1e-3, "slope {slope}");
    assert!(v["max_pi_residual"].as_f64().unwrap() < 1e-8);
}
