//! Acceptance checks: one pass/fail line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DVector;
use noisetube::commands::simulate;
use noisetube::config::{Resolved, RunConfig};
use noisetube::setup::{CyclePipeline, TorusPipeline, solve_cycle, solve_torus_for, torus_pipeline};
use noisetube_core::cycle::{adjoint_normalization_drift, covariance_eigens, covariance_kronecker, covariance_series};
use noisetube_core::linalg::sorted_symmetric_eigen;
use noisetube_core::oracles::{hopf, linosc, radial_torus};
use noisetube_core::torus::{TorusCovarianceMethod, adjoint_normalization_error, torus_covariance};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

/// Label, CLI arguments and the files expected to match.
type Run<'a> = (&'a str, &'a [&'a str], &'a [&'a str]);

fn resolved(text: &str) -> Resolved {
    RunConfig::parse(text).unwrap().resolve().unwrap()
}

fn problem(name: &str) -> Resolved {
    resolved(&format!("problem = \"{name}\"\n"))
}

fn radial() -> Resolved {
    resolved("problem = \"qp_radial\"\n[solver]\nN = 4\n")
}

fn within(label: &str, value: f64, tol: f64) -> Result<(), String> {
    if value < tol { Ok(()) } else { Err(format!("{label} = {value:.3e} exceeds {tol:.0e}")) }
}

fn solve(r: &Resolved) -> Result<CyclePipeline, String> {
    solve_cycle(r).map_err(|e| e.to_string())
}

fn solve_torus(r: &Resolved) -> Result<TorusPipeline, String> {
    let sol = solve_torus_for(r).map_err(|e| e.to_string())?;
    torus_pipeline(&sol, r.method).map_err(|e| e.to_string())
}

fn hopf_eigenvalue_curve() -> Check {
    let start = Instant::now();
    let pl = solve(&problem("hopf"))?;
    let eig = covariance_eigens(&pl.covariance);
    let steps = pl.covariance.steps();
    let error = (0..=100)
        .map(|k| {
            let idx = k * steps / 100;
            (eig.values[idx][0] - hopf::eigenvalue(eig.times[idx])).abs()
        })
        .fold(0.0, f64::max);
    let seconds = start.elapsed().as_secs_f64();
    within("max eigenvalue error", error, 1e-6)?;
    within("runtime in seconds", seconds, 5.0)?;
    Ok(format!("max error {error:.2e}, {seconds:.2} s"))
}

fn hopf_adjoint_projection() -> Check {
    let pl = solve(&problem("hopf"))?;
    let w = pl.adjoint.lambda(0.0).ok_or("no adjoint")?;
    let w_error = (w - DVector::from_vec(vec![0.0, 1.0])).amax();
    let (mut lam_error, mut q_error) = (0.0f64, 0.0f64);
    for k in 0..=200 {
        let t = k as f64 / 200.0;
        let lam = pl.adjoint.lambda(t).ok_or("no adjoint")?;
        lam_error = lam_error.max((lam - hopf::adjoint(t)).amax());
        q_error = q_error.max((pl.projection.at(t) - hopf::projection(t)).amax());
    }
    within("λ error", lam_error, 1e-8)?;
    within("Q error", q_error, 1e-8)?;
    within("w error", w_error, 1e-10)?;
    Ok(format!("λ {lam_error:.2e}, Q {q_error:.2e}, w {w_error:.2e}"))
}

fn linear_oscillator() -> Check {
    let pl = solve(&problem("linosc"))?;
    let eig = covariance_eigens(&pl.covariance);
    let (mut c_error, mut e_error) = (0.0f64, 0.0f64);
    for (k, t) in eig.times.iter().enumerate() {
        c_error = c_error.max((pl.covariance.node(k) - linosc::covariance(*t)).amax());
        let want = linosc::eigenvalues(*t);
        e_error = e_error.max((eig.values[k][0] - want[0]).abs()).max((eig.values[k][1] - want[1]).abs());
    }
    let m_error = pl
        .orbit
        .monodromy()
        .eigenvalues
        .iter()
        .map(|mu| (mu.norm() - (-2.0 * PI).exp()).abs())
        .fold(0.0, f64::max);
    within("C error", c_error, 1e-8)?;
    within("eigenvalue error", e_error, 1e-8)?;
    within("multiplier modulus error", m_error, 1e-8)?;
    Ok(format!("C {c_error:.2e}, eigenvalues {e_error:.2e}, moduli {m_error:.2e}"))
}

fn radial_torus() -> Check {
    let r = radial();
    let pl = solve_torus(&r)?;
    let sol = pl.solution();
    let (omega, forcing) = (sol.problem().param("Omega").unwrap(), sol.problem().param("omega").unwrap());
    let (mut c_error, mut w_error) = (0.0f64, 0.0f64);
    for (j, &phi) in sol.ops().nodes().iter().enumerate() {
        c_error = c_error.max((&pl.covariance.c0[j] - radial_torus::covariance0(phi, omega, forcing)).amax());
        w_error = w_error.max((pl.projection.adjoints().w_phi(j) - radial_torus::w_phi(phi, forcing)).amax());
    }
    within("C(φ_j, 0) error", c_error, 1e-4)?;
    within("w_φ error", w_error, 1e-6)?;
    Ok(format!("N = {}: C {c_error:.2e}, w_φ {w_error:.2e}", r.modes))
}

fn van_der_pol_torus() -> Check {
    let start = Instant::now();
    let r = problem("vdp_coupled");
    let pl = solve_torus(&r)?;
    let seconds = start.elapsed().as_secs_f64();
    let a_norm = pl.covariance.a.clone().svd(false, false).singular_values.max();
    let mut ranks = Vec::new();
    for c in &pl.covariance.c0 {
        let (vals, _) = sorted_symmetric_eigen(c);
        let cutoff = 1e-6 * vals[0];
        ranks.push(vals.iter().filter(|v| **v > cutoff).count());
    }
    within("‖A‖₂", a_norm, 1e-6)?;
    within("runtime in seconds", seconds, 600.0)?;
    if ranks.iter().any(|&k| k != 2) {
        return Err(format!("eigenvalue counts above the cutoff: {ranks:?}"));
    }
    let delta = pl.solution().problem().param("delta").unwrap();
    Ok(format!("N = {}, ‖A‖₂ {a_norm:.2e}, rank 2 at {} nodes, δ = {delta:.4}, {seconds:.1} s", r.modes, ranks.len()))
}

fn cross_method() -> Check {
    let mut gaps = Vec::new();
    for name in ["hopf", "linosc"] {
        let pl = solve(&problem(name))?;
        let series = covariance_series(&pl.orbit, &pl.projection, &pl.noise).map_err(|e| e.to_string())?;
        let kron = covariance_kronecker(&pl.orbit, &pl.projection, &pl.noise).map_err(|e| e.to_string())?;
        let gap = (&series.c0 - &kron.c0).amax();
        within(&format!("{name} series vs Kronecker"), gap, 1e-10)?;
        gaps.push(format!("{name} {gap:.2e}"));
    }
    let pl = solve_torus(&radial())?;
    let fixed = torus_covariance(&pl.projection, TorusCovarianceMethod::FixedPoint).map_err(|e| e.to_string())?;
    let gap = pl.covariance.c0.iter().zip(&fixed.c0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    within("qp_radial fixed point vs direct", gap, 1e-6)?;
    gaps.push(format!("qp_radial {gap:.2e}"));
    Ok(gaps.join(", "))
}

fn cycle_invariants(name: &str) -> Result<String, String> {
    let pl = solve(&problem(name))?;
    let steps = pl.covariance.steps();
    let q0 = pl.projection.node(0);
    let mesh = pl.covariance.mesh();
    let (mut idem, mut flow, mut conserved) = (0.0f64, 0.0f64, 0.0f64);
    for k in (0..=steps).step_by((steps / 100).max(1)) {
        let t = mesh[k];
        let q = pl.projection.at(t);
        let x = pl.orbit.flow().at(t);
        idem = idem.max((&q * &q - &q).amax());
        flow = flow.max((&x * &q0 - &q * &x).amax());
        if let Some(lam) = pl.adjoint.lambda(t) {
            conserved = conserved.max((lam.transpose() * pl.covariance.node(k) * &lam)[(0, 0)].abs());
        }
    }
    let zero = pl.covariance.conserved.abs();
    let normalization = adjoint_normalization_drift(&pl.orbit, &pl.adjoint);
    within(&format!("{name} Q² - Q"), idem, 1e-8)?;
    within(&format!("{name} X Q(0) - Q X"), flow, 1e-8)?;
    within(&format!("{name} λᵀCλ"), conserved, 1e-6)?;
    within(&format!("{name} wᵀC(0)w"), zero, 1e-6)?;
    within(&format!("{name} adjoint normalization"), normalization, 1e-8)?;
    Ok(format!("{name} ok (λᵀCλ {conserved:.1e})"))
}

fn torus_invariants(r: &Resolved) -> Result<String, String> {
    let pl = solve_torus(r)?;
    let sol = pl.solution();
    let steps = sol.rk_steps();
    let (mut idem, mut flow, mut conserved, mut zero) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for j in 0..sol.node_count() {
        let q0 = pl.projection.at(j, 0.0);
        let omega = pl.projection.adjoints().omega(j);
        zero = zero.max((omega.transpose() * &pl.covariance.c0[j] * &omega).amax());
        for k in (0..=steps).step_by(steps / 20) {
            let t = k as f64 / steps as f64;
            let q = pl.projection.at(j, t);
            let x = sol.flows()[j].node(k);
            idem = idem.max((&q * &q - &q).amax());
            flow = flow.max((&x * &q0 - &q * &x).amax());
            let lam = pl.projection.adjoints().lambda(j, t);
            conserved = conserved.max((lam.transpose() * pl.covariance.node_at(&pl.projection, j, k) * &lam).amax());
        }
    }
    let normalization = adjoint_normalization_error(sol, pl.projection.adjoints(), 40);
    let name = &r.problem;
    within(&format!("{name} Q² - Q"), idem, 1e-8)?;
    within(&format!("{name} X Q(0) - Q X"), flow, 1e-8)?;
    within(&format!("{name} ΛᵀCΛ"), conserved, 1e-6)?;
    within(&format!("{name} ΩᵀCΩ"), zero, 1e-6)?;
    within(&format!("{name} adjoint normalization"), normalization, 1e-6)?;
    Ok(format!("{name} ok (ΩᵀCΩ {zero:.1e})"))
}

fn invariant_suite() -> Check {
    let parts = [
        cycle_invariants("hopf")?,
        cycle_invariants("linosc")?,
        torus_invariants(&radial())?,
        torus_invariants(&problem("vdp_coupled"))?,
    ];
    Ok(parts.join(", "))
}

fn fraction(comparison: &serde_json::Value, component: usize) -> f64 {
    comparison["components"][component]["fraction_within"].as_f64().unwrap_or(0.0)
}

fn band_check(name: &str, r: &Resolved, components: usize, required: f64) -> Result<String, String> {
    let sim = simulate(r).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for i in 0..components {
        let f = fraction(&sim.comparison, i);
        let compared = &sim.comparison["components"][i]["compared_bins"];
        if f < required {
            return Err(format!("{name} component {}: {f:.3} of {compared} bins in band, need {required}", i + 1));
        }
        parts.push(format!("{f:.3} of {compared}"));
    }
    Ok(format!("{name} {} ({} samples)", parts.join(" / "), sim.output.samples.len()))
}

fn linosc_check(tau_star: f64) -> Result<String, String> {
    let r = resolved(&format!("problem = \"linosc\"\n[sde]\ntau_star = {tau_star}\n"));
    let sim = simulate(&r).map_err(|e| e.to_string())?;
    let frob = sim.comparison["covariance"][0]["relative_frobenius"].as_f64().ok_or("no covariance check")?;
    within(&format!("linosc at {tau_star} relative Frobenius"), frob, 0.15)?;
    Ok(format!("linosc@{tau_star} {frob:.3}"))
}

fn monte_carlo() -> Check {
    let parts = [
        band_check("hopf", &problem("hopf"), 1, 0.90)?,
        linosc_check(0.1)?,
        linosc_check(0.9)?,
        band_check("qp_radial", &radial(), 1, 0.85)?,
        band_check("vdp_coupled", &problem("vdp_coupled"), 2, 0.80)?,
    ];
    Ok(parts.join(", "))
}

fn run_cli(args: &[&str], out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_noisetube"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr).trim()))
    }
}

fn same_files(a: &Path, b: &Path, files: &[&str]) -> Result<(), String> {
    for f in files {
        let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => return Err(format!("{f} differs between {} and {}", a.display(), b.display())),
        }
    }
    Ok(())
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sim_files = ["samples.csv", "bins.csv", "compare.json"];
    let runs: [Run; 3] = [
        ("cycle", &["cycle", "--problem", "hopf"], &["orbit.csv", "adjoint.csv", "covariance.csv", "diagnostics.json"]),
        ("hopf", &["simulate", "--problem", "hopf", "--periods", "40", "--trajectories", "8", "--min-count", "10"], &sim_files),
        ("qp_radial", &["simulate", "--problem", "qp_radial", "--N", "4", "--periods", "160"], &sim_files),
    ];
    let mut compared = 0;
    for (label, args, files) in runs {
        let dirs: Vec<_> = ["a1", "b1", "c8"].iter().map(|d| tmp.path().join(format!("{label}-{d}"))).collect();
        for (dir, threads) in dirs.iter().zip(["1", "1", "8"]) {
            let mut full = args.to_vec();
            if args[0] == "simulate" {
                full.extend(["--threads", threads]);
            }
            run_cli(&full, dir)?;
        }
        same_files(&dirs[0], &dirs[1], files)?;
        same_files(&dirs[0], &dirs[2], files)?;
        compared += 2 * files.len();
    }
    Ok(format!("{compared} file pairs identical across repeated, 1-thread and 8-thread runs"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("hopf eigenvalue curve", hopf_eigenvalue_curve),
        ("hopf adjoint and projection", hopf_adjoint_projection),
        ("linear oscillator covariance and multipliers", linear_oscillator),
        ("qp_radial node covariances and w_phi", radial_torus),
        ("vdp_coupled covariance rank and residual", van_der_pol_torus),
        ("cross-method equivalence", cross_method),
        ("invariant suite", invariant_suite),
        ("Monte-Carlo agreement", monte_carlo),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[PASS] {} {name}: {detail} [{seconds:.1} s]", k + 1),
            Err(reason) => {
                failed += 1;
                println!("[FAIL] {} {name}: {reason} [{seconds:.1} s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
