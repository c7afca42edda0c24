//! Solves the invariant object of a built-in problem from a resolved configuration, with the
//! starting guesses and continuation paths each problem needs.

use std::f64::consts::PI;

use nalgebra::DVector;
use noisetube_core::cycle::{
    AdjointCycle, CovarianceCycle, CycleSettings, NoiseIntegral, PeriodicOrbit, ProjectionFamily,
    StationaryCovariance, adjoint_function, adjoint_left_vector, covariance_kronecker, covariance_series,
    noise_quadrature, projection_family, propagate_covariance, solve_periodic_orbit,
};
use noisetube_core::model::{Problem, builtin_problem};
use noisetube_core::oracles::radial_torus as radial;
use noisetube_core::torus::{
    TorusCovariance, TorusCovarianceMethod, TorusProjection, TorusSettings, TorusSolution, solve_torus,
    torus_adjoints, torus_covariance, torus_projection,
};

use crate::config::{CovarianceMethod, Resolved};
use crate::error::{CliError, CliResult};

/// Rotation number of the coupled Van der Pol torus studied by default.
pub fn van_der_pol_rotation() -> f64 {
    140.0 / (62.0 * 2f64.sqrt())
}

/// Largest coupling increment of the continuation from uncoupled oscillators.
const COUPLING_STEP: f64 = 0.1;

/// The built-in problem with configured parameter overrides.
pub fn configured_problem(r: &Resolved) -> CliResult<Problem> {
    let mut p = builtin_problem(&r.problem).map_err(|e| CliError::config(e.to_string()))?;
    for (name, value) in &r.params {
        p = p.with_param(name, *value).map_err(|e| CliError::config(e.to_string()))?;
    }
    Ok(p)
}

/// Everything derived from a periodic orbit.
#[derive(Debug, Clone)]
pub struct CyclePipeline {
    pub orbit: PeriodicOrbit,
    pub adjoint: AdjointCycle,
    pub projection: ProjectionFamily,
    pub noise: NoiseIntegral,
    /// `C(0)` from the configured route.
    pub stationary: StationaryCovariance,
    /// `‖C_series(0) - C_kronecker(0)‖∞`.
    pub route_gap: f64,
    pub covariance: CovarianceCycle,
}

pub fn solve_cycle(r: &Resolved) -> CliResult<CyclePipeline> {
    if r.torus {
        return Err(CliError::config(format!("{} has an invariant torus, not a limit cycle", r.problem)));
    }
    let p = configured_problem(r)?;
    let settings = CycleSettings {
        intervals: r.mesh_intervals,
        degree: r.degree,
        rk_steps: r.rk_steps,
        newton_tol: r.tol,
        max_newton: r.max_newton,
    };
    let period = p.period_hint().unwrap_or(2.0 * PI);
    let guess: Box<dyn Fn(f64) -> DVector<f64>> = match r.problem.as_str() {
        "linosc" => Box::new(|t| DVector::from_vec(vec![0.8 * (2.0 * PI * t).sin(), (2.0 * PI * t).cos()])),
        _ => Box::new(|t| DVector::from_vec(vec![(2.0 * PI * t).cos(), (2.0 * PI * t).sin()])),
    };
    let orbit = solve_periodic_orbit(&p, &*guess, period, None, &settings)?;
    let w = if orbit.is_autonomous() { Some(adjoint_left_vector(&orbit)?) } else { None };
    let adjoint = adjoint_function(&orbit, w.as_ref())?;
    let projection = projection_family(&orbit, &adjoint);
    let noise = noise_quadrature(&orbit)?;
    let series = covariance_series(&orbit, &projection, &noise)?;
    let kronecker = covariance_kronecker(&orbit, &projection, &noise)?;
    let route_gap = (&series.c0 - &kronecker.c0).amax();
    let stationary = if r.method == CovarianceMethod::Kronecker { kronecker } else { series };
    let covariance = propagate_covariance(&orbit, &projection, &noise, &stationary.c0)?;
    Ok(CyclePipeline { orbit, adjoint, projection, noise, stationary, route_gap, covariance })
}

fn torus_settings(r: &Resolved) -> TorusSettings {
    TorusSettings {
        modes: r.modes,
        intervals: r.mesh_intervals,
        degree: r.degree,
        rk_steps: r.rk_steps,
        newton_tol: r.tol,
        max_newton: r.max_newton,
    }
}

/// Solves the torus of `qp_radial` (free rotation frequency) or `vdp_coupled` (free detuning,
/// continued in the coupling from the uncoupled product of circles).
pub fn solve_torus_for(r: &Resolved) -> CliResult<TorusSolution> {
    if !r.torus {
        return Err(CliError::config(format!("{} has a limit cycle, not an invariant torus", r.problem)));
    }
    let p = configured_problem(r)?;
    let settings = torus_settings(r);
    match r.problem.as_str() {
        "qp_radial" => {
            let forcing = p.param("omega")?;
            let rho = r.rho.unwrap_or(p.param("Omega")? / forcing);
            let rotation = rho * forcing;
            let guess = move |phi: f64, t: f64| radial::gamma(phi, t, rotation, forcing);
            let p = p.with_param("Omega", rotation)?;
            Ok(solve_torus(&p, &guess, 2.0 * PI / forcing, rho, "Omega", &settings)?)
        }
        "vdp_coupled" => {
            let rho = r.rho.unwrap_or_else(van_der_pol_rotation);
            let target = p.param("beta")?;
            let ansatz = move |phi: f64, t: f64| {
                let (s1, c1) = (2.0 * PI * t).sin_cos();
                let (s2, c2) = (2.0 * PI * (phi + rho * t)).sin_cos();
                DVector::from_vec(vec![2.0 * s1, 2.0 * c1, 2.0 * s2, 2.0 * rho * c2])
            };
            let start = p.with_param("beta", 0.0)?.with_param("delta", rho * rho - 1.0)?;
            let mut sol = solve_torus(&start, &ansatz, 2.0 * PI, rho, "delta", &settings)?;
            let steps = (target.abs() / COUPLING_STEP).ceil() as usize;
            for k in 1..=steps {
                let beta = target * k as f64 / steps as f64;
                let next = sol.problem().with_param("beta", beta)?;
                let prev = sol.clone();
                sol = solve_torus(&next, &|phi, t| prev.gamma_at(phi, t), prev.period(), rho, "delta", &settings)?;
            }
            Ok(sol)
        }
        other => Err(CliError::config(format!("no torus continuation known for {other}"))),
    }
}

/// Adjoints, projections and stationary covariance of a solved torus.
#[derive(Debug, Clone)]
pub struct TorusPipeline {
    pub projection: TorusProjection,
    pub covariance: TorusCovariance,
}

impl TorusPipeline {
    pub fn solution(&self) -> &TorusSolution {
        self.projection.solution()
    }
}

pub fn torus_pipeline(sol: &TorusSolution, method: CovarianceMethod) -> CliResult<TorusPipeline> {
    let method = match method {
        CovarianceMethod::FixedPoint => TorusCovarianceMethod::FixedPoint,
        CovarianceMethod::Direct => TorusCovarianceMethod::Direct,
        other => return Err(CliError::config(format!("{} does not apply to tori", other.name()))),
    };
    let adjoints = torus_adjoints(sol)?;
    let projection = torus_projection(sol, &adjoints);
    let covariance = torus_covariance(&projection, method)?;
    Ok(TorusPipeline { projection, covariance })
}
