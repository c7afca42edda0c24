use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use noisetube_core::cycle::*;
use noisetube_core::model::{hopf, linear_oscillator};
use noisetube_core::oracles;

fn circle(t: f64) -> DVector<f64> {
    DVector::from_vec(vec![(2.0 * PI * t).cos(), (2.0 * PI * t).sin()])
}

struct Pipeline {
    orbit: PeriodicOrbit,
    projection: ProjectionFamily,
    noise: NoiseIntegral,
    w: Option<DVector<f64>>,
}

fn hopf_pipeline() -> Pipeline {
    let p = hopf().unwrap();
    let orbit = solve_periodic_orbit(&p, &circle, 2.0 * PI, None, &CycleSettings::default()).unwrap();
    let w = adjoint_left_vector(&orbit).unwrap();
    let adjoint = adjoint_function(&orbit, Some(&w)).unwrap();
    let projection = projection_family(&orbit, &adjoint);
    let noise = noise_quadrature(&orbit).unwrap();
    Pipeline { orbit, projection, noise, w: Some(w) }
}

fn linosc_pipeline() -> Pipeline {
    let p = linear_oscillator().unwrap();
    let guess = |t: f64| DVector::from_vec(vec![0.8 * (2.0 * PI * t).sin(), (2.0 * PI * t).cos()]);
    let orbit = solve_periodic_orbit(&p, &guess, 2.0 * PI, None, &CycleSettings::default()).unwrap();
    let adjoint = adjoint_function(&orbit, None).unwrap();
    let projection = projection_family(&orbit, &adjoint);
    let noise = noise_quadrature(&orbit).unwrap();
    Pipeline { orbit, projection, noise, w: None }
}

#[test]
fn hopf_adjoint_and_projection_match_closed_forms() {
    let pl = hopf_pipeline();
    let w = pl.w.unwrap();
    assert!((w - DVector::from_vec(vec![0.0, 1.0])).amax() < 1e-10);
    for k in 0..=200 {
        let t = k as f64 / 200.0;
        let lam = pl.projection.adjoint().lambda(t).unwrap();
        assert!((lam - oracles::hopf::adjoint(t)).amax() < 1e-8, "λ at {t}");
        let q = pl.projection.at(t);
        assert!((&q - oracles::hopf::projection(t)).amax() < 1e-8, "Q at {t}");
        assert!((&q * &q - &q).amax() < 1e-8);
    }
}

#[test]
fn hopf_covariance_routes_agree_with_reference() {
    let pl = hopf_pipeline();
    let series = covariance_series(&pl.orbit, &pl.projection, &pl.noise).unwrap();
    let kron = covariance_kronecker(&pl.orbit, &pl.projection, &pl.noise).unwrap();
    assert!((&series.c0 - &kron.c0).amax() < 1e-10);
    assert!((&series.c0 - DMatrix::from_row_slice(2, 2, &[1.0 / 40.0, 0.0, 0.0, 0.0])).amax() < 1e-9);
    let projected = (pl.projection.node(0) * pl.noise.total() * pl.projection.node(0).transpose())[(0, 0)]
        * pl.orbit.period();
    let exact = oracles::hopf::projected_noise_integral(1.0);
    assert!((projected / exact - 1.0).abs() < 1e-6);
    let cov = propagate_covariance(&pl.orbit, &pl.projection, &pl.noise, &series.c0).unwrap();
    assert!(cov.ode_discrepancy < 1e-8, "{}", cov.ode_discrepancy);
    assert!(cov.symmetry_breaking.abs() < 1e-8);
    let eig = covariance_eigens(&cov);
    for k in 0..=100 {
        let idx = k * cov.steps() / 100;
        let t = eig.times[idx];
        assert!((eig.values[idx][0] - oracles::hopf::eigenvalue(t)).abs() < 1e-6);
        assert!(eig.values[idx][1].abs() < 1e-6);
    }
}

#[test]
fn linosc_covariance_matches_reference() {
    let pl = linosc_pipeline();
    for t in [0.0, 0.3, 0.7] {
        assert!((pl.orbit.gamma(t) - oracles::linosc::gamma(t)).amax() < 1e-9);
    }
    for mu in &pl.orbit.monodromy().eigenvalues {
        assert!((mu.norm() - oracles::linosc::multiplier_modulus()).abs() < 1e-8);
    }
    let series = covariance_series(&pl.orbit, &pl.projection, &pl.noise).unwrap();
    let kron = covariance_kronecker(&pl.orbit, &pl.projection, &pl.noise).unwrap();
    assert!((&series.c0 - &kron.c0).amax() < 1e-10);
    let cov = propagate_covariance(&pl.orbit, &pl.projection, &pl.noise, &series.c0).unwrap();
    let eig = covariance_eigens(&cov);
    let mut worst = 0.0f64;
    for (k, t) in eig.times.iter().enumerate() {
        worst = worst.max((cov.node(k) - oracles::linosc::covariance(*t)).amax());
        let want = oracles::linosc::eigenvalues(*t);
        worst = worst.max((eig.values[k][0] - want[0]).abs()).max((eig.values[k][1] - want[1]).abs());
    }
    assert!(worst < 1e-8, "{worst:e}");
}
