//! Fixed-step Runge–Kutta integration of the state and its variational equation.

#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{Lu, max_abs_vec};
use crate::model::Problem;
use crate::trajectory::Trajectory;

/// Distance from 1 within which a multiplier counts as the trivial one.
pub const TRIVIAL_MULTIPLIER_TOL: f64 = 1e-6;

/// Integrates `ẋ = T f(t, x)` over `[0, t_end]` with `steps` classical RK4 steps and
/// returns the cubic Hermite dense output.
pub fn integrate_orbit(
    problem: &Problem,
    x0: &DVector<f64>,
    period: f64,
    t_end: f64,
    steps: usize,
) -> Result<Trajectory> {
    let n = problem.dim();
    check_args(n, x0, period, t_end, steps)?;
    let p = problem.param_values();
    let h = t_end / steps as f64;
    let rhs = |t: f64, x: &[f64]| -> Vec<f64> {
        let mut f = problem.drift_raw(t, x, p);
        f.iter_mut().for_each(|v| *v *= period);
        f
    };
    let mut values = Vec::with_capacity((steps + 1) * n);
    let mut derivs = Vec::with_capacity((steps + 1) * n);
    let mut x: Vec<f64> = x0.iter().copied().collect();
    let mut k1 = rhs(0.0, &x);
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        let t = step as f64 * h;
        values.extend_from_slice(&x);
        derivs.extend_from_slice(&k1);
        axpy_into(&mut tmp, &x, 0.5 * h, &k1);
        let k2 = rhs(t + 0.5 * h, &tmp);
        axpy_into(&mut tmp, &x, 0.5 * h, &k2);
        let k3 = rhs(t + 0.5 * h, &tmp);
        axpy_into(&mut tmp, &x, h, &k3);
        let k4 = rhs(t + h, &tmp);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state integration"));
        }
        k1 = rhs(t + h, &x);
    }
    values.extend_from_slice(&x);
    derivs.extend_from_slice(&k1);
    Trajectory::from_hermite(n, t_end, &values, &derivs)
}

fn axpy_into(out: &mut [f64], x: &[f64], a: f64, y: &[f64]) {
    for i in 0..out.len() {
        out[i] = x[i] + a * y[i];
    }
}

fn check_args(n: usize, x0: &DVector<f64>, period: f64, t_end: f64, steps: usize) -> Result<()> {
    if x0.len() != n {
        return Err(Error::DimensionMismatch { what: "initial state", expected: n, found: x0.len() });
    }
    if !(period > 0.0 && period.is_finite()) || !(t_end > 0.0) || steps == 0 {
        return Err(Error::InvalidArgument("period, horizon and step count must be positive".into()));
    }
    Ok(())
}

/// State trajectory together with the fundamental solution `X(t)` of `Ẋ = T Df(t, x(t)) X`,
/// `X(0) = I`, both on the same uniform mesh.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    state: Trajectory,
    matrix: Trajectory,
    period: f64,
    dim: usize,
}

impl FundamentalSolution {
    pub fn state(&self) -> &Trajectory {
        &self.state
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.state.intervals()
    }

    pub fn mesh(&self) -> Vec<f64> {
        self.state.mesh()
    }

    pub fn t_end(&self) -> f64 {
        self.state.t_end()
    }

    /// `X(t)` by Hermite interpolation.
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        self.matrix.eval_matrix(t, self.dim)
    }

    /// `X` at the `k`-th mesh point.
    pub fn node(&self, k: usize) -> DMatrix<f64> {
        self.matrix.node_matrix(k, self.dim)
    }

    /// State at the `k`-th mesh point.
    pub fn state_node(&self, k: usize) -> DVector<f64> {
        self.state.node(k)
    }

    /// `X` at the end of the horizon; the monodromy matrix when the horizon is one period.
    pub fn end(&self) -> DMatrix<f64> {
        self.node(self.steps())
    }

    /// `X(t)⁻¹` through an LU factorization.
    pub fn inverse_at(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(Lu::new(self.at(t), "fundamental solution")?.inverse())
    }

    pub fn inverse_node(&self, k: usize) -> Result<DMatrix<f64>> {
        Ok(Lu::new(self.node(k), "fundamental solution")?.inverse())
    }
}

/// Integrates state and variational equation jointly from `x0` with `steps` RK4 steps.
pub fn fundamental_solution(
    problem: &Problem,
    x0: &DVector<f64>,
    period: f64,
    t_end: f64,
    steps: usize,
) -> Result<FundamentalSolution> {
    let n = problem.dim();
    check_args(n, x0, period, t_end, steps)?;
    let h = t_end / steps as f64;
    let p = problem.param_values();
    let rhs = |t: f64, x: &DVector<f64>, m: &DMatrix<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let f = problem.drift_with(t, x.as_slice(), p) * period;
        let j = problem.jacobian_with(t, x.as_slice(), p) * period;
        (f, j * m)
    };
    let mut values = Vec::with_capacity((steps + 1) * n);
    let mut derivs = Vec::with_capacity((steps + 1) * n);
    let mut mvalues = Vec::with_capacity((steps + 1) * n * n);
    let mut mderivs = Vec::with_capacity((steps + 1) * n * n);
    let mut x = x0.clone();
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut k1 = rhs(0.0, &x, &m);
    for step in 0..steps {
        let t = step as f64 * h;
        values.extend_from_slice(x.as_slice());
        derivs.extend_from_slice(k1.0.as_slice());
        mvalues.extend_from_slice(m.as_slice());
        mderivs.extend_from_slice(k1.1.as_slice());
        let k2 = rhs(t + 0.5 * h, &(&x + &k1.0 * (0.5 * h)), &(&m + &k1.1 * (0.5 * h)));
        let k3 = rhs(t + 0.5 * h, &(&x + &k2.0 * (0.5 * h)), &(&m + &k2.1 * (0.5 * h)));
        let k4 = rhs(t + h, &(&x + &k3.0 * h), &(&m + &k3.1 * h));
        x += (&k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + &k4.0) * (h / 6.0);
        m += (&k1.1 + &k2.1 * 2.0 + &k3.1 * 2.0 + &k4.1) * (h / 6.0);
        if x.iter().chain(m.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("variational integration"));
        }
        k1 = rhs(t + h, &x, &m);
    }
    values.extend_from_slice(x.as_slice());
    derivs.extend_from_slice(k1.0.as_slice());
    mvalues.extend_from_slice(m.as_slice());
    mderivs.extend_from_slice(k1.1.as_slice());
    Ok(FundamentalSolution {
        state: Trajectory::from_hermite(n, t_end, &values, &derivs)?,
        matrix: Trajectory::from_hermite(n * n, t_end, &mvalues, &mderivs)?,
        period,
        dim: n,
    })
}

/// Floquet data of a monodromy matrix.
#[derive(Debug, Clone)]
pub struct MonodromyInfo {
    pub matrix: DMatrix<f64>,
    /// Multipliers sorted by descending modulus.
    pub eigenvalues: Vec<Complex<f64>>,
    /// Index into `eigenvalues` of the multiplier associated with the time shift.
    pub trivial: Option<usize>,
    /// Largest modulus among the nontrivial multipliers.
    pub transversal_radius: f64,
    /// `-1/ln(transversal_radius)`: periods needed to contract deviations by `e`.
    pub contraction_rate: f64,
    /// `‖(X(1) - I) f(γ(0))‖ / ‖f(γ(0))‖` for autonomous problems.
    pub tangent_residual: Option<f64>,
}

impl MonodromyInfo {
    pub fn is_transversally_stable(&self) -> bool {
        self.transversal_radius < 1.0
    }

    pub fn require_transversal_stability(&self) -> Result<()> {
        if self.is_transversally_stable() {
            Ok(())
        } else {
            Err(Error::NotTransversallyStable(self.transversal_radius))
        }
    }

    pub fn trivial_multiplier(&self) -> Option<Complex<f64>> {
        self.trivial.map(|i| self.eigenvalues[i])
    }
}

/// Floquet analysis of `x1 = X(1)`. For autonomous problems `tangent` is `f(γ(0))`.
pub fn monodromy(x1: &DMatrix<f64>, tangent: Option<&DVector<f64>>) -> Result<MonodromyInfo> {
    if !x1.is_square() {
        return Err(Error::DimensionMismatch { what: "monodromy", expected: x1.nrows(), found: x1.ncols() });
    }
    if x1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("monodromy matrix"));
    }
    let mut eigenvalues: Vec<Complex<f64>> = x1.clone().complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
    let mut trivial = None;
    let mut tangent_residual = None;
    if let Some(f0) = tangent {
        let mut best = 0;
        for (i, mu) in eigenvalues.iter().enumerate() {
            let d = (mu - 1.0).norm();
            let db = (eigenvalues[best] - 1.0).norm();
            if d < db || (d == db && mu.re > eigenvalues[best].re) {
                best = i;
            }
        }
        let dist = (eigenvalues[best] - 1.0).norm();
        if dist > TRIVIAL_MULTIPLIER_TOL {
            return Err(Error::NoTrivialMultiplier(dist));
        }
        trivial = Some(best);
        let scale = max_abs_vec(f0);
        if scale > 0.0 {
            tangent_residual = Some(max_abs_vec(&(x1 * f0 - f0)) / scale);
        }
    }
    let transversal_radius = eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != trivial)
        .map(|(_, mu)| mu.norm())
        .fold(0.0, f64::max);
    let contraction_rate = if transversal_radius < 1.0 && transversal_radius > 0.0 {
        -1.0 / transversal_radius.ln()
    } else if transversal_radius == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(MonodromyInfo {
        matrix: x1.clone(),
        eigenvalues,
        trivial,
        transversal_radius,
        contraction_rate,
        tangent_residual,
    })
}
