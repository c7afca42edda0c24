use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use noisetube_core::linalg::sorted_symmetric_eigen;
use noisetube_core::model::{coupled_van_der_pol, radial_torus};
use noisetube_core::oracles::radial_torus as exact;
use noisetube_core::torus::*;

const OMEGA: f64 = PI;
const FORCING: f64 = 1.0;

fn radial(modes: usize) -> (TorusSolution, TorusProjection) {
    let p = radial_torus(3.0, FORCING).unwrap();
    let guess = |phi: f64, t: f64| exact::gamma(phi, t, OMEGA, FORCING) * 1.05;
    let settings = TorusSettings { modes, intervals: 60, degree: 5, ..TorusSettings::default() };
    let sol = solve_torus(&p, &guess, 2.0 * PI / FORCING, OMEGA / FORCING, "Omega", &settings).unwrap();
    let adj = torus_adjoints(&sol).unwrap();
    let proj = torus_projection(&sol, &adj);
    (sol, proj)
}

fn van_der_pol() -> (TorusSolution, TorusProjection) {
    let rho = 140.0 / (62.0 * 2f64.sqrt());
    let settings = TorusSettings::default();
    let ansatz = move |phi: f64, t: f64| {
        let (s1, c1) = (2.0 * PI * t).sin_cos();
        let (s2, c2) = (2.0 * PI * (phi + rho * t)).sin_cos();
        DVector::from_vec(vec![2.0 * s1, 2.0 * c1, 2.0 * s2, 2.0 * rho * c2])
    };
    let p = coupled_van_der_pol(0.5, 0.0, rho * rho - 1.0).unwrap();
    let mut sol = solve_torus(&p, &ansatz, 2.0 * PI, rho, "delta", &settings).unwrap();
    assert!(sol.newton_residual() < 1e-10);
    for step in 1..=5 {
        let p = sol.problem().with_param("beta", 0.1 * step as f64).unwrap();
        let prev = sol.clone();
        sol = solve_torus(&p, &|phi, t| prev.gamma_at(phi, t), prev.period(), rho, "delta", &settings).unwrap();
    }
    let adj = torus_adjoints(&sol).unwrap();
    let proj = torus_projection(&sol, &adj);
    (sol, proj)
}

fn check_invariants(sol: &TorusSolution, proj: &TorusProjection) {
    assert!(sol.boundary_defect() < 1e-8, "boundary {:e}", sol.boundary_defect());
    assert!(sol.flow_boundary_defect() < 1e-6, "flow boundary {:e}", sol.flow_boundary_defect());
    assert!(adjoint_normalization_error(sol, proj.adjoints(), 40) < 1e-6);
    let steps = sol.rk_steps();
    for j in 0..sol.node_count() {
        let q0 = proj.at(j, 0.0);
        for k in [0, steps / 3, steps] {
            let t = k as f64 / steps as f64;
            let q = proj.at(j, t);
            let x = sol.flows()[j].node(k);
            assert!((&q * &q - &q).amax() < 1e-8);
            assert!((&x * &q0 - &q * &x).amax() < 1e-8);
        }
    }
}

#[test]
fn radial_torus_geometry_matches_closed_form() {
    let (sol, proj) = radial(2);
    assert!((sol.problem().param("Omega").unwrap() - OMEGA).abs() < 1e-8);
    check_invariants(&sol, &proj);
    for (j, &phi) in sol.ops().nodes().iter().enumerate() {
        let want = DVector::from_vec(vec![2.0 * (2.0 * PI * phi).cos(), 2.0 * (2.0 * PI * phi).sin()]);
        assert!((sol.gamma(j, 0.0) - want).amax() < 1e-6);
        assert!((proj.adjoints().w_phi(j) - exact::w_phi(phi, FORCING)).amax() < 1e-6);
        for t in [0.0, 0.35, 1.0] {
            assert!((proj.at(j, t) - exact::projection(phi, t, OMEGA, FORCING)).amax() < 1e-6);
        }
    }
    assert!((proj.at(0, 0.0) - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).amax() < 1e-8);
    assert!((sol.gamma_at(0.15, 0.0) - exact::gamma(0.15, 0.0, OMEGA, FORCING)).amax() < 1e-6);
    assert!((sol.gamma_at(sol.ops().nodes()[3], 0.4) - sol.gamma(3, 0.4)).amax() < 1e-12);
}

#[test]
fn radial_torus_covariance_needs_four_modes() {
    // The exact covariance carries angular modes up to four, so two modes alias.
    let (sol, proj) = radial(2);
    let cov = torus_covariance(&proj, TorusCovarianceMethod::FixedPoint).unwrap();
    let error = sol
        .ops()
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, &phi)| (&cov.c0[j] - exact::covariance0(phi, OMEGA, FORCING)).amax())
        .fold(0.0, f64::max);
    assert!(error > 1e-2);
}

#[test]
fn radial_torus_covariance_methods_agree_with_reference() {
    let mut solved = Vec::new();
    for modes in [4, 8] {
        let (sol, proj) = radial(modes);
        let fixed = torus_covariance(&proj, TorusCovarianceMethod::FixedPoint).unwrap();
        let direct = torus_covariance(&proj, TorusCovarianceMethod::Direct).unwrap();
        for (j, &phi) in sol.ops().nodes().iter().enumerate() {
            let want = exact::covariance0(phi, OMEGA, FORCING);
            assert!((&fixed.c0[j] - &want).amax() < 1e-4);
            assert!((&direct.c0[j] - &want).amax() < 1e-4);
            assert!((&fixed.c0[j] - &direct.c0[j]).norm() < 1e-6);
            assert!(sorted_symmetric_eigen(&direct.c0[j]).0[1] > -1e-8);
        }
        assert!(direct.a_norm < 1e-8 && direct.zero_level < 1e-6);
        assert!(direct.quasiperiodicity_defect(&proj) < 1e-6);
        assert!(direct.level_drift(&proj, 20) < 1e-6);
        solved.push((proj, direct));
    }
    // Doubling the number of modes leaves the interpolated covariance unchanged.
    for phi in [0.1, 0.37, 0.8] {
        let coarse = solved[0].1.at(&solved[0].0, phi, 0);
        let fine = solved[1].1.at(&solved[1].0, phi, 0);
        assert!((coarse - fine).norm() < 1e-8);
    }
}

#[test]
fn van_der_pol_torus_by_coupling_continuation() {
    let (sol, proj) = van_der_pol();
    let delta = sol.problem().param("delta").unwrap();
    assert!((delta - 1.9422).abs() < 1e-3, "{delta}");
    check_invariants(&sol, &proj);
    for j in 0..sol.node_count() {
        for t in [0.0, 0.5] {
            let sv = proj.at(j, t).singular_values();
            assert_eq!(sv.iter().filter(|v| **v > 1e-6).count(), 2);
        }
    }
    let cov = torus_covariance(&proj, TorusCovarianceMethod::Direct).unwrap();
    assert!(cov.a_norm < 1e-6);
    assert!(cov.zero_level < 1e-6);
    for c in &cov.c0 {
        let (vals, _) = sorted_symmetric_eigen(c);
        let cutoff = 1e-6 * vals[0];
        assert_eq!(vals.iter().filter(|v| **v > cutoff).count(), 2);
    }
    let fixed = torus_covariance(&proj, TorusCovarianceMethod::FixedPoint).unwrap();
    let gap = cov.c0.iter().zip(&fixed.c0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(gap < 1e-4, "{gap:e}");
}

#[test]
fn zero_noise_gives_zero_covariance() {
    use noisetube_core::model::{ProblemSpec, build_problem};
    use std::sync::Arc;
    let base = radial_torus(OMEGA, FORCING).unwrap();
    let mut spec: ProblemSpec = base.spec().clone();
    spec.diffusion = Arc::new(|_t, _x, _p| DMatrix::zeros(2, 1));
    let p = build_problem(spec).unwrap();
    let guess = |phi: f64, t: f64| exact::gamma(phi, t, OMEGA, FORCING);
    let settings = TorusSettings { modes: 4, intervals: 60, degree: 5, ..TorusSettings::default() };
    let sol = solve_torus(&p, &guess, 2.0 * PI, OMEGA, "Omega", &settings).unwrap();
    let proj = torus_projection(&sol, &torus_adjoints(&sol).unwrap());
    let cov = torus_covariance(&proj, TorusCovarianceMethod::Direct).unwrap();
    assert!(cov.c0.iter().all(|c| c.amax() == 0.0));
    assert!(cov.a_norm == 0.0);
}

fn recovers_coordinates(proj: &TorusProjection, points: &[(f64, f64)]) {
    use noisetube_core::section::*;
    let cov = torus_covariance(proj, TorusCovarianceMethod::Direct).unwrap();
    let geom = TorusGeometry::new(proj, &cov, proj.solution().rk_steps()).unwrap();
    let n = geom.dim();
    for &(psi, tau) in points {
        let c = SectionCoords { psi, tau };
        // A transversal offset: the image of an arbitrary vector under I - Λ-dual directions.
        let lam = geom.adjoints(c);
        let v = DVector::from_fn(n, |i, _| 0.02 * (1.0 + i as f64).sin());
        let tangents = &lam * (lam.transpose() * &lam).try_inverse().unwrap();
        let offset = &v - tangents * (lam.transpose() * &v);
        let x = geom.point(c) + offset;
        let found = locate_section_coords(&geom, &x, tau, None).unwrap();
        let gap = |a: f64, b: f64| ((a - b + 0.5).rem_euclid(1.0) - 0.5).abs();
        assert!(gap(found.psi, psi) < 1e-7 && gap(found.tau, tau) < 1e-7, "{psi},{tau} -> {found:?}");
        let s = section_sample(&geom, 0.1, &x, found, 0, 0);
        assert!(s.residual < 1e-8);
        assert_eq!(s.projections.len(), geom.transversal_rank());
        let k = (tau * proj.solution().rk_steps() as f64).round() as usize;
        let want = cov.at(proj, psi, k);
        assert!((geom.covariance(found) - &want).norm() < 1e-3 * want.norm(), "{psi} {tau} {found:?} {} vs {}", geom.covariance(found), want);
    }
}

#[test]
fn radial_torus_section_coordinates() {
    let (_, proj) = radial(4);
    recovers_coordinates(&proj, &[(0.1, 0.0), (0.77, 0.31), (0.5, 0.9)]);
}

#[test]
fn van_der_pol_torus_section_coordinates() {
    let (_, proj) = van_der_pol();
    recovers_coordinates(&proj, &[(0.1, 0.2), (0.6, 0.5), (0.95, 0.97)]);
}
