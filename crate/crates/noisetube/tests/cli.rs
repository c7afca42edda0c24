use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use noisetube::io::Table;
use noisetube_core::oracles;

fn noisetube(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noisetube")).args(args).output().unwrap()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let t = Table::read(path).unwrap();
    let c = t.column(name).unwrap();
    t.rows().iter().map(|r| r[c].parse().unwrap()).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap()
}

#[test]
fn hopf_cycle_writes_the_eigenvalue_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = noisetube(&["cycle", "--problem", "hopf", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = column(&dir.path().join("covariance.csv"), "t");
    let eig = column(&dir.path().join("covariance.csv"), "eig_1");
    for (t, e) in t.iter().zip(&eig) {
        assert!((e - oracles::hopf::eigenvalue(*t)).abs() < 1e-6);
    }
    assert_eq!(column(&dir.path().join("orbit.csv"), "x_1").len(), t.len());
    assert_eq!(column(&dir.path().join("adjoint.csv"), "lambda_2").len(), t.len());
}

#[test]
fn linear_oscillator_reports_its_multipliers() {
    let dir = tempfile::tempdir().unwrap();
    let out = noisetube(&["cycle", "--problem", "linosc", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let d = json(&dir.path().join("diagnostics.json"));
    for m in d["monodromy"]["moduli"].as_array().unwrap() {
        assert!((m.as_f64().unwrap() - (-2.0 * PI).exp()).abs() < 1e-8);
    }
    assert!(d["adjoint_w"].is_null());
}

#[test]
fn configuration_errors_exit_with_two() {
    let out = noisetube(&["cycle", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "config_file");
    let out = noisetube(&["torus", "--problem", "qp_radial", "--N", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["exit_code"], 2);
    let out = noisetube(&["cycle", "--problem", "qp_radial"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "problem = \"hopf\"\n[sde]\nsigmaa = 1\n").unwrap();
    let out = noisetube(&["cycle", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = noisetube(&["cycle", "--problem", "hopf", "--tol", "1e-30", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_json(&out)["error"], "solver");
}

#[test]
fn radial_torus_files_and_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = noisetube(&["torus", "--problem", "qp_radial", "--N", "4", "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let diag = json(&dir.path().join("diagnostics.json"));
    assert!(diag["covariance"]["A_norm_2"].as_f64().unwrap() < 1e-6);
    let nodes = dir.path().join("covariance_nodes.csv");
    let (phi, t) = (column(&nodes, "phi"), column(&nodes, "t"));
    let c: Vec<Vec<f64>> = ["c_1_1", "c_2_1", "c_2_2"].iter().map(|n| column(&nodes, n)).collect();
    for k in (0..phi.len()).filter(|&k| t[k] == 0.0) {
        let want = oracles::radial_torus::covariance0(phi[k], PI, 1.0);
        assert!((c[0][k] - want[(0, 0)]).abs() < 1e-4);
        assert!((c[1][k] - want[(1, 0)]).abs() < 1e-4);
        assert!((c[2][k] - want[(1, 1)]).abs() < 1e-4);
    }
    // A zero-noise run on the stored torus stays on it.
    let sim = tempfile::tempdir().unwrap();
    let out = noisetube(&[
        "simulate", "--problem", "qp_radial", "--N", "4", "--geometry", d, "--sigma", "0", "--periods", "16", "--dt", "1e-5",
        "--out", sim.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bins = sim.path().join("bins.csv");
    for s in column(&bins, "std_1").into_iter().filter(|s| !s.is_nan()) {
        assert!(s < 1e-8, "{s}");
    }
    let samples = sim.path().join("samples.csv");
    assert!(column(&samples, "residual").iter().all(|r| *r < 1e-8));
}

#[test]
fn compare_rebins_simulated_samples() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = noisetube(&["simulate", "--problem", "hopf", "--periods", "20", "--min-count", "10", "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let samples = dir.path().join("samples.csv");
    let n = column(&samples, "proj_1").len();
    let re = tempfile::tempdir().unwrap();
    let out = noisetube(&[
        "compare", "--problem", "hopf", "--bins", "10", "--samples", samples.to_str().unwrap(), "--out",
        re.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let counts = column(&re.path().join("bins.csv"), "count");
    assert_eq!(counts.len(), 10);
    assert_eq!(counts.iter().sum::<f64>() as usize, n);
    assert_eq!(json(&re.path().join("compare.json"))["samples"], n);
}
