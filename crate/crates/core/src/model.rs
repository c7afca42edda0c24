//! Problem definitions: drift, diffusion and parameters of an Itô SDE in rescaled time.
//!
//! A problem describes `dx = T f(t, x) dt + σ √T F(t, x) dW` with `f` and `F` periodic
//! in `t` with period 1 (or independent of `t` for autonomous problems).

#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Vector field `(t, x, p) -> f(t, x; p)`.
pub type DriftFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync>;
/// Matrix field `(t, x, p) -> M(t, x; p)`, used for Jacobians and diffusion.
pub type MatrixFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> DMatrix<f64> + Send + Sync>;

/// User-facing description of a problem before validation.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub dim_state: usize,
    pub dim_noise: usize,
    pub autonomous: bool,
    /// Named parameters with their default values, in the order passed to the closures.
    pub params: Vec<(String, f64)>,
    pub drift: DriftFn,
    pub drift_jacobian: Option<MatrixFn>,
    /// Returns an `dim_state × dim_noise` matrix.
    pub diffusion: MatrixFn,
    pub period_scale_hint: Option<f64>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field("autonomous", &self.autonomous)
            .field("params", &self.params)
            .field("period_scale_hint", &self.period_scale_hint)
            .finish_non_exhaustive()
    }
}

/// A validated problem with concrete parameter values.
#[derive(Clone, Debug)]
pub struct Problem {
    spec: ProblemSpec,
    values: Vec<f64>,
}

/// Tolerance on the relative deviation between a supplied Jacobian and central differences.
pub const JACOBIAN_CHECK_TOL: f64 = 1e-5;

/// Validates a specification and freezes its default parameter values.
pub fn build_problem(spec: ProblemSpec) -> Result<Problem> {
    if spec.dim_state == 0 || spec.dim_noise == 0 {
        return Err(Error::InvalidProblem("state and noise dimensions must be positive".into()));
    }
    for (i, (name, value)) in spec.params.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::InvalidProblem(format!("parameter `{name}` is not finite")));
        }
        if spec.params[..i].iter().any(|(other, _)| other == name) {
            return Err(Error::InvalidProblem(format!("duplicate parameter `{name}`")));
        }
    }
    if let Some(hint) = spec.period_scale_hint {
        if !(hint > 0.0 && hint.is_finite()) {
            return Err(Error::InvalidProblem("period scale hint must be positive".into()));
        }
    }
    let values: Vec<f64> = spec.params.iter().map(|(_, v)| *v).collect();
    let problem = Problem { spec, values };
    problem.validate()?;
    Ok(problem)
}

/// Deterministic, well-spread probe states in `[-2.5, 2.5]^n` avoiding the origin.
fn probe_points(n: usize) -> Vec<Vec<f64>> {
    (0..4)
        .map(|i| {
            (0..n)
                .map(|k| {
                    let a = 0.754_877_666 * (i * n + k + 1) as f64;
                    let frac = a - a.floor();
                    let v = 5.0 * frac - 2.5;
                    if v.abs() < 0.2 { v + 0.7 } else { v }
                })
                .collect()
        })
        .collect()
}

impl Problem {
    fn validate(&self) -> Result<()> {
        let n = self.dim();
        let m = self.noise_dim();
        let p = &self.values;
        for x in probe_points(n) {
            for t in [0.13, 0.71] {
                let f = (self.spec.drift)(t, &x, p);
                if f.len() != n {
                    return Err(Error::DimensionMismatch { what: "drift output", expected: n, found: f.len() });
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("drift at probe state"));
                }
                let g = (self.spec.diffusion)(t, &x, p);
                if g.shape() != (n, m) {
                    return Err(Error::DimensionMismatch {
                        what: "diffusion output",
                        expected: n * m,
                        found: g.nrows() * g.ncols(),
                    });
                }
                if let Some(jac) = &self.spec.drift_jacobian {
                    let j = jac(t, &x, p);
                    if j.shape() != (n, n) {
                        return Err(Error::DimensionMismatch {
                            what: "drift Jacobian",
                            expected: n * n,
                            found: j.nrows() * j.ncols(),
                        });
                    }
                    let fd = self.fd_jacobian(t, &x, p);
                    let scale = crate::linalg::max_abs(&j).max(1.0);
                    let deviation = crate::linalg::max_abs(&(&j - &fd)) / scale;
                    if deviation > JACOBIAN_CHECK_TOL {
                        return Err(Error::JacobianMismatch { deviation });
                    }
                }
            }
            if self.spec.autonomous {
                let f0 = (self.spec.drift)(0.13, &x, p);
                let f1 = (self.spec.drift)(0.71, &x, p);
                let g0 = (self.spec.diffusion)(0.13, &x, p);
                let g1 = (self.spec.diffusion)(0.71, &x, p);
                let df = f0.iter().zip(&f1).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
                let dg = crate::linalg::max_abs(&(g0 - g1));
                if df > 1e-12 || dg > 1e-12 {
                    return Err(Error::InvalidProblem(
                        "declared autonomous but the vector field depends on t".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn fd_jacobian(&self, t: f64, x: &[f64], p: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let mut out = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        for k in 0..n {
            let h = 1e-6 * (1.0 + x[k].abs());
            xp[k] = x[k] + h;
            let fp = (self.spec.drift)(t, &xp, p);
            xp[k] = x[k] - h;
            let fm = (self.spec.drift)(t, &xp, p);
            xp[k] = x[k];
            for i in 0..n {
                out[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim_state
    }

    pub fn noise_dim(&self) -> usize {
        self.spec.dim_noise
    }

    pub fn is_autonomous(&self) -> bool {
        self.spec.autonomous
    }

    pub fn period_hint(&self) -> Option<f64> {
        self.spec.period_scale_hint
    }

    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.spec.params.iter().map(|(n, _)| n.as_str())
    }

    pub fn param_values(&self) -> &[f64] {
        &self.values
    }

    pub fn param_index(&self, name: &str) -> Result<usize> {
        self.spec
            .params
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        Ok(self.values[self.param_index(name)?])
    }

    /// Copy of the problem with one parameter changed.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Problem> {
        let idx = self.param_index(name)?;
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("parameter `{name}` must be finite")));
        }
        let mut out = self.clone();
        out.values[idx] = value;
        Ok(out)
    }

    /// Copy of the problem with all parameter values replaced.
    pub fn with_param_values(&self, values: &[f64]) -> Result<Problem> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.values.len(),
                found: values.len(),
            });
        }
        let mut out = self.clone();
        out.values.copy_from_slice(values);
        Ok(out)
    }

    pub fn drift_raw(&self, t: f64, x: &[f64], p: &[f64]) -> Vec<f64> {
        (self.spec.drift)(t, x, p)
    }

    pub fn drift(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec((self.spec.drift)(t, x.as_slice(), &self.values))
    }

    pub fn drift_with(&self, t: f64, x: &[f64], p: &[f64]) -> DVector<f64> {
        DVector::from_vec((self.spec.drift)(t, x, p))
    }

    /// Drift Jacobian, analytic if supplied, otherwise central differences.
    pub fn jacobian_with(&self, t: f64, x: &[f64], p: &[f64]) -> DMatrix<f64> {
        match &self.spec.drift_jacobian {
            Some(j) => j(t, x, p),
            None => self.fd_jacobian(t, x, p),
        }
    }

    pub fn jacobian(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        self.jacobian_with(t, x.as_slice(), &self.values)
    }

    /// Central-difference derivative of the drift with respect to parameter `idx`.
    pub fn drift_param_derivative(&self, t: f64, x: &[f64], p: &[f64], idx: usize) -> DVector<f64> {
        let h = 1e-6 * (1.0 + p[idx].abs());
        let mut pp = p.to_vec();
        pp[idx] = p[idx] + h;
        let fp = (self.spec.drift)(t, x, &pp);
        pp[idx] = p[idx] - h;
        let fm = (self.spec.drift)(t, x, &pp);
        DVector::from_fn(x.len(), |i, _| (fp[i] - fm[i]) / (2.0 * h))
    }

    pub fn diffusion(&self, t: f64, x: &DVector<f64>) -> DMatrix<f64> {
        (self.spec.diffusion)(t, x.as_slice(), &self.values)
    }

    pub fn diffusion_with(&self, t: f64, x: &[f64], p: &[f64]) -> DMatrix<f64> {
        (self.spec.diffusion)(t, x, p)
    }
}

/// Names accepted by [`builtin_problem`].
pub const BUILTIN_NAMES: [&str; 4] = ["hopf", "linosc", "qp_radial", "vdp_coupled"];

/// One of the reference problems with its default parameters.
pub fn builtin_problem(name: &str) -> Result<Problem> {
    match name {
        "hopf" => hopf(),
        "linosc" => linear_oscillator(),
        "qp_radial" => radial_torus(PI, 1.0),
        "vdp_coupled" => coupled_van_der_pol(0.5, 0.5, 1.9422),
        other => Err(Error::InvalidProblem(format!(
            "unknown built-in `{other}` (expected one of {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

fn quadratic_noise() -> MatrixFn {
    Arc::new(|_t, x, _p| DMatrix::from_column_slice(2, 1, &[x[0] * x[1], x[1] * x[1]]))
}

/// Planar Hopf normal form with a stable unit-circle limit cycle of period `2π`.
pub fn hopf() -> Result<Problem> {
    build_problem(ProblemSpec {
        name: "hopf".into(),
        dim_state: 2,
        dim_noise: 1,
        autonomous: true,
        params: vec![],
        drift: Arc::new(|_t, x, _p| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            vec![x[0] - x[1] - x[0] * r2, x[0] + x[1] - x[1] * r2]
        }),
        drift_jacobian: Some(Arc::new(|_t, x, _p| {
            let (a, b) = (x[0], x[1]);
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    1.0 - 3.0 * a * a - b * b,
                    -1.0 - 2.0 * a * b,
                    1.0 - 2.0 * a * b,
                    1.0 - a * a - 3.0 * b * b,
                ],
            )
        })),
        diffusion: quadratic_noise(),
        period_scale_hint: Some(2.0 * PI),
    })
}

/// Damped oscillator driven with period 1 in rescaled time; its response is a unit circle.
pub fn linear_oscillator() -> Result<Problem> {
    build_problem(ProblemSpec {
        name: "linosc".into(),
        dim_state: 2,
        dim_noise: 1,
        autonomous: false,
        params: vec![],
        drift: Arc::new(|t, x, _p| vec![x[1], -2.0 * x[1] - x[0] + 2.0 * (2.0 * PI * t).cos()]),
        drift_jacobian: Some(Arc::new(|_t, _x, _p| {
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0])
        })),
        diffusion: Arc::new(|_t, x, _p| DMatrix::from_column_slice(2, 1, &[0.0, x[0]])),
        period_scale_hint: Some(2.0 * PI),
    })
}

/// Periodically forced planar rotation with an invariant torus of rotation number `Ω/ω`.
/// Parameters are `Omega` (rotation frequency) and `omega` (forcing frequency).
pub fn radial_torus(rotation: f64, forcing: f64) -> Result<Problem> {
    if !(forcing > 0.0) {
        return Err(Error::InvalidProblem("forcing frequency must be positive".into()));
    }
    build_problem(ProblemSpec {
        name: "qp_radial".into(),
        dim_state: 2,
        dim_noise: 1,
        autonomous: false,
        params: vec![("Omega".into(), rotation), ("omega".into(), forcing)],
        drift: Arc::new(|t, x, p| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let g = 1.0 + r * ((2.0 * PI * t).cos() - 1.0);
            vec![-p[0] * x[1] + x[0] * g, p[0] * x[0] + x[1] * g]
        }),
        drift_jacobian: Some(Arc::new(|t, x, p| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let c = (2.0 * PI * t).cos() - 1.0;
            let g = 1.0 + r * c;
            let k = if r > 0.0 { c / r } else { 0.0 };
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    g + k * x[0] * x[0],
                    -p[0] + k * x[0] * x[1],
                    p[0] + k * x[0] * x[1],
                    g + k * x[1] * x[1],
                ],
            )
        })),
        diffusion: quadratic_noise(),
        period_scale_hint: Some(2.0 * PI / forcing),
    })
}

/// Two diffusively coupled Van der Pol oscillators with additive noise on the velocities.
/// Parameters are `eps` (nonlinearity), `beta` (coupling) and `delta` (detuning).
pub fn coupled_van_der_pol(eps: f64, beta: f64, delta: f64) -> Result<Problem> {
    build_problem(ProblemSpec {
        name: "vdp_coupled".into(),
        dim_state: 4,
        dim_noise: 2,
        autonomous: true,
        params: vec![("eps".into(), eps), ("beta".into(), beta), ("delta".into(), delta)],
        drift: Arc::new(|_t, y, p| {
            let (eps, beta, delta) = (p[0], p[1], p[2]);
            vec![
                y[1],
                -eps * (y[0] * y[0] - 1.0) * y[1] - y[0] + beta * (y[2] - y[0]),
                y[3],
                -eps * (y[2] * y[2] - 1.0) * y[3] - (1.0 + delta) * y[2] + beta * (y[0] - y[2]),
            ]
        }),
        drift_jacobian: Some(Arc::new(|_t, y, p| {
            let (eps, beta, delta) = (p[0], p[1], p[2]);
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    0.0,
                    1.0,
                    0.0,
                    0.0,
                    -2.0 * eps * y[0] * y[1] - 1.0 - beta,
                    -eps * (y[0] * y[0] - 1.0),
                    beta,
                    0.0,
                    0.0,
                    0.0,
                    0.0,
                    1.0,
                    beta,
                    0.0,
                    -2.0 * eps * y[2] * y[3] - (1.0 + delta) - beta,
                    -eps * (y[2] * y[2] - 1.0),
                ],
            )
        })),
        diffusion: Arc::new(|_t, _y, _p| {
            let mut g = DMatrix::zeros(4, 2);
            g[(1, 0)] = 1.0;
            g[(3, 1)] = 1.0;
            g
        }),
        period_scale_hint: Some(2.0 * PI),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hopf_jacobian_on_cycle() {
        let p = hopf().unwrap();
        let j = p.jacobian(0.0, &DVector::from_vec(vec![1.0, 0.0]));
        let expect = DMatrix::from_row_slice(2, 2, &[-2.0, -1.0, 1.0, 0.0]);
        assert!((j - expect).abs().max() < 1e-14);
    }

    #[test]
    fn van_der_pol_drift_sample() {
        let p = coupled_van_der_pol(0.5, 0.5, 1.9422).unwrap();
        let f = p.drift(0.0, &DVector::from_vec(vec![2.0, 0.0, 2.0, 0.0]));
        assert!((f[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn unknown_builtin_is_rejected() {
        assert!(matches!(builtin_problem("lorenz"), Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn wrong_drift_length_is_rejected() {
        let mut spec = hopf().unwrap().spec().clone();
        spec.drift = Arc::new(|_t, x, _p| vec![x[0]]);
        spec.drift_jacobian = None;
        assert!(matches!(build_problem(spec), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn inconsistent_jacobian_is_rejected() {
        let mut spec = hopf().unwrap().spec().clone();
        spec.drift_jacobian = Some(Arc::new(|_t, _x, _p| DMatrix::identity(2, 2)));
        assert!(matches!(build_problem(spec), Err(Error::JacobianMismatch { .. })));
    }

    #[test]
    fn time_dependent_autonomous_is_rejected() {
        let mut spec = linear_oscillator().unwrap().spec().clone();
        spec.autonomous = true;
        assert!(matches!(build_problem(spec), Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn with_param_replaces_value() {
        let p = coupled_van_der_pol(0.5, 0.0, 1.0).unwrap().with_param("beta", 0.25).unwrap();
        assert_eq!(p.param("beta").unwrap(), 0.25);
        assert!(p.with_param("gamma", 1.0).is_err());
    }
}
