use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_consensus-lab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&stdout(&o)).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn analyze_example_network() {
    let v = json(&["analyze"]);
    assert!((v["lambda_min"].as_f64().unwrap() - 0.382).abs() < 1e-3);
    assert!((v["lambda_max"].as_f64().unwrap() - 2.618).abs() < 1e-3);
    assert_eq!(v["is_real_spectrum"], true);
}

#[test]
fn analyze_rejects_unrooted_graph() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", r#"{"nodes": 4, "source": 4, "edges": [[4,1,1.0],[2,3,1.0]]}"#);
    let o = run(&["analyze", "--graph", &g]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("unreachable nodes: [2, 3]"), "{err}");
}

#[test]
fn malformed_inputs_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", r#"{"nodes": 2, "source": 2, "edges": [[2,1,0]]}"#);
    assert_eq!(run(&["analyze", "--graph", &g]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "--graph", "/nonexistent/g.json"]).status.code(), Some(2));
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
    assert_eq!(run(&["design", "--method", "adsr", "--objective", "speed"]).status.code(), Some(2));
}

#[test]
fn perturbed_network_has_complex_spectrum() {
    let v = json(&["analyze", "--perturbation", "0.1"]);
    assert_eq!(v["is_real_spectrum"], false);
    let o = run(&["design", "--method", "robust-adsr", "--perturbation", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not real"));
}

#[test]
fn closed_form_designs() {
    let v = json(&["design", "--method", "robust-adsr"]);
    let g = &v["gains"];
    assert!((g["alpha_hat"].as_f64().unwrap() - 0.8).abs() < 1e-9);
    assert_eq!(g["beta1"].as_f64().unwrap(), 0.0);
    assert!((g["beta2"].as_f64().unwrap() - 0.2).abs() < 1e-9);
    assert_eq!(v["settling_steps"], 7);

    let v = json(&["design", "--method", "no-dsr"]);
    assert!((v["gains"]["alpha_hat"].as_f64().unwrap() - 0.6667).abs() < 1e-4);
}

#[test]
fn nesterov_search_design() {
    let v = json(&["design", "--method", "nesterov", "--objective", "sigma"]);
    assert!((v["sigma"].as_f64().unwrap() - 0.5706).abs() <= 0.005);
    let g = &v["gains"];
    assert_eq!(g["beta1"], g["beta2"]);
}

#[test]
fn simulate_reports_settling() {
    let v = json(&["simulate", "--method", "robust-adsr", "--format", "json"]);
    assert_eq!(v["ts"], 7);
    let v = json(&["simulate", "--method", "no-dsr", "--format", "json"]);
    assert_eq!(v["ts"], 14);
    assert!(v["consensus_error"].as_f64().unwrap() < 1e-9);
}

#[test]
fn decentralized_trajectory_matches_central() {
    let gains = ["--alpha-hat", "0.8", "--beta2", "0.2", "--d0", "2.5"];
    let central = run(&["simulate", gains[0], gains[1], gains[2], gains[3], gains[4], gains[5]]);
    let local = run(&["simulate", gains[0], gains[1], gains[2], gains[3], gains[4], gains[5], "--decentralized"]);
    let (a, b) = (csv_rows(&stdout(&central)), csv_rows(&stdout(&local)));
    assert_eq!(a.len(), 201);
    assert_eq!(stdout(&central).lines().next(), Some("step,X_s,X_1,X_2,X_3,X_4"));
    for (x, y) in a.iter().zip(&b) {
        for (u, v) in x.iter().zip(y) {
            assert!((u - v).abs() <= 1e-9);
        }
    }
}

#[test]
fn unstable_gains_exit_with_code_three() {
    assert_eq!(run(&["simulate", "--alpha-hat", "1.5", "--steps", "2000"]).status.code(), Some(3));
    assert_eq!(run(&["stability", "--alpha-hat", "1.5"]).status.code(), Some(3));
    let v = json(&["stability", "--alpha-hat", "0.8", "--beta2", "0.2"]);
    assert_eq!(v["stable"], true);
    assert!((v["margin"].as_f64().unwrap() - (1.0 - 0.2f64.sqrt())).abs() < 1e-12);
}

#[test]
fn robust_roots_lie_on_one_circle() {
    let o = run(&["roots", "--method", "robust-adsr"]);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 8);
    for r in rows {
        assert!((r[4] - 0.2f64.sqrt()).abs() < 1e-9);
    }
    let rows = csv_rows(&stdout(&run(&["roots", "--method", "no-dsr"])));
    let max = rows.iter().map(|r| r[4]).fold(0.0, f64::max);
    assert!((max - 0.745).abs() < 1e-3);
}

#[test]
fn perturbation_sweep_stays_stable() {
    let o = run(&["perturb", "--count", "9"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 9 * 8);
    assert!(rows.iter().all(|r| r[5] < 1.0));
    let v = json(&["perturb", "--count", "3", "--format", "json"]);
    assert_eq!(v["all_stable"], true);
}

#[test]
fn outputs_and_manifests_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = run(&["simulate", "--method", "robust-adsr", "--out", d.to_str().unwrap()]);
        assert!(o.status.success());
    }
    for name in ["trajectory.csv", "summary.json", "manifest.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let m: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["files"].as_array().unwrap().len(), 2);
    assert_eq!(m["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn table_regeneration_on_example() {
    let o = run(&["reproduce-table1", "--format", "csv", "--band", "0.05"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 11);
    assert!(lines[1..].iter().all(|l| l.contains(",true,true,true,")), "{text}");
    let no_dsr = lines.iter().find(|l| l.starts_with("optimal-no-dsr")).unwrap();
    assert_eq!(no_dsr.split(',').nth(6), Some("14"));
}

#[test]
fn table_regeneration_on_degenerate_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", r#"{"nodes": 3, "source": 3, "edges": [[3,1,1.0],[3,2,1.0]]}"#);
    let o = run(&["reproduce-table1", "--graph", &g]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("robust-adsr") && l.contains("degenerate: use no-DSR, σ = 0")), "{text}");
}
