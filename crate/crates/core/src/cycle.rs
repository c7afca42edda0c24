//! Limit cycles and periodic responses: orbit, adjoint, projections and the stationary
//! covariance of transversal deviations.
//!
//! The covariance is available through three independent routes: a truncated series of
//! the one-period map, a bordered Kronecker linear solve, and direct integration of the
//! periodic Lyapunov equation. [`propagate_covariance`] reports the discrepancy between
//! the closed form and the integrated equation.

#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::collocation::{CollocationScheme, FreeScalars, gauss_legendre, linearize_segment};
use crate::error::{Error, Result};
use crate::flow::{FundamentalSolution, MonodromyInfo, fundamental_solution, monodromy};
use crate::linalg::{Lu, kron, max_abs, null_vector, sorted_symmetric_eigen, unvec, vec_of};
use crate::model::Problem;
use crate::trajectory::Trajectory;

/// Discretization and Newton settings for periodic orbits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSettings {
    pub intervals: usize,
    pub degree: usize,
    /// RK4 steps per period for the fundamental solution and everything downstream.
    pub rk_steps: usize,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for CycleSettings {
    fn default() -> Self {
        Self { intervals: 20, degree: 4, rk_steps: 4000, newton_tol: 1e-10, max_newton: 20 }
    }
}

/// Hyperplane `normalᵀ (x - anchor) = 0` fixing the time shift of an autonomous orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCondition {
    pub anchor: DVector<f64>,
    pub normal: DVector<f64>,
}

impl PhaseCondition {
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        self.normal.dot(&(x - &self.anchor))
    }
}

/// A converged periodic orbit with its variational data.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    problem: Problem,
    collocation: Trajectory,
    period: f64,
    phase: Option<PhaseCondition>,
    flow: FundamentalSolution,
    monodromy: MonodromyInfo,
    newton_iterations: usize,
    residual: f64,
}

impl PeriodicOrbit {
    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// Collocation polynomial returned by the boundary-value solver.
    pub fn collocation(&self) -> &Trajectory {
        &self.collocation
    }

    /// Fine RK4 state started from the collocated `γ(0)`.
    pub fn orbit(&self) -> &Trajectory {
        self.flow.state()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn phase_condition(&self) -> Option<&PhaseCondition> {
        self.phase.as_ref()
    }

    pub fn flow(&self) -> &FundamentalSolution {
        &self.flow
    }

    pub fn monodromy(&self) -> &MonodromyInfo {
        &self.monodromy
    }

    pub fn newton_iterations(&self) -> usize {
        self.newton_iterations
    }

    pub fn newton_residual(&self) -> f64 {
        self.residual
    }

    /// `γ(t)` for `t ∈ [0, 1]`.
    pub fn gamma(&self, t: f64) -> DVector<f64> {
        self.flow.state().eval(t)
    }

    /// `f(t, γ(t))`; for autonomous problems the tangent `γ'(t)/T`.
    pub fn tangent(&self, t: f64) -> DVector<f64> {
        self.problem.drift(t, &self.gamma(t))
    }

    /// `‖γ(1) - γ(0)‖∞` of the fine trajectory.
    pub fn periodicity_defect(&self) -> f64 {
        let k = self.flow.steps();
        (self.flow.state_node(k) - self.flow.state_node(0)).amax()
    }

    pub fn is_autonomous(&self) -> bool {
        self.problem.is_autonomous()
    }
}

/// Solves the periodic boundary-value problem by collocation and Newton's method.
///
/// For autonomous problems the period is unknown and `phase` (default: the hyperplane
/// through `guess(0)` orthogonal to `f(guess(0))`) fixes the time shift. For
/// non-autonomous problems `period_guess` is the forcing period and stays fixed.
pub fn solve_periodic_orbit(
    problem: &Problem,
    guess: &dyn Fn(f64) -> DVector<f64>,
    period_guess: f64,
    phase: Option<PhaseCondition>,
    settings: &CycleSettings,
) -> Result<PeriodicOrbit> {
    let n = problem.dim();
    if !(period_guess > 0.0 && period_guess.is_finite()) {
        return Err(Error::InvalidArgument("period guess must be positive".into()));
    }
    let scheme = CollocationScheme::new(settings.intervals, settings.degree)?;
    let mut values = scheme.sample(n, guess)?;
    let autonomous = problem.is_autonomous();
    let phase = if autonomous {
        Some(match phase {
            Some(p) => p,
            None => {
                let anchor = DVector::from_column_slice(&values[..n]);
                let normal = problem.drift(0.0, &anchor);
                PhaseCondition { anchor, normal }
            }
        })
    } else {
        None
    };
    let free = FreeScalars { period: autonomous, param: None };
    let params = problem.param_values().to_vec();
    let mut period = period_guess;
    let mut residual;
    let mut iterations = 0;
    let last = (scheme.base_points() - 1) * n;
    loop {
        let (cond, coll_res) = linearize_segment(problem, &scheme, &values, period, &params, free)?;
        let x0 = DVector::from_column_slice(&values[..n]);
        let x1 = DVector::from_column_slice(&values[last..last + n]);
        let mut rhs = DVector::zeros(n + free.count());
        rhs.rows_mut(0, n).copy_from(&(&x0 - &x1 - &cond.phi_g));
        let mut res = coll_res.max((&x1 - &x0).amax());
        if let Some(pc) = &phase {
            let r = pc.residual(&x0);
            res = res.max(r.abs());
            rhs[n] = -r;
        }
        residual = res;
        if !res.is_finite() || res > 1e8 {
            return Err(Error::NewtonDivergence(format!("residual {res:e} after {iterations} steps")));
        }
        if res < settings.newton_tol {
            break;
        }
        if iterations >= settings.max_newton {
            return Err(Error::NewtonDivergence(format!(
                "residual {res:e} after {iterations} steps (cap reached)"
            )));
        }
        let size = n + free.count();
        let mut jac = DMatrix::zeros(size, size);
        jac.view_mut((0, 0), (n, n)).copy_from(&(&cond.phi - DMatrix::identity(n, n)));
        if autonomous {
            jac.view_mut((0, n), (n, 1)).copy_from(&cond.phi_q);
            let pc = phase.as_ref().expect("autonomous problems carry a phase condition");
            jac.view_mut((n, 0), (1, n)).copy_from(&pc.normal.transpose());
        }
        let step = Lu::new(jac, "periodic orbit Newton system")?.solve_vec(&rhs);
        let dx0 = step.rows(0, n).into_owned();
        let dq = step.rows(n, free.count()).into_owned();
        let delta = cond.expand(&dx0, &dq);
        values.iter_mut().zip(&delta).for_each(|(v, d)| *v += d);
        if autonomous {
            period += dq[0];
            if !(period > 0.0) {
                return Err(Error::NewtonDivergence(format!("period became {period}")));
            }
        }
        iterations += 1;
    }
    let collocation = scheme.trajectory(n, &values)?;
    let gamma0 = DVector::from_column_slice(&values[..n]);
    if autonomous && problem.drift(0.0, &gamma0).amax() < 1e-8 {
        return Err(Error::NewtonDivergence("iteration collapsed onto an equilibrium".into()));
    }
    let flow = fundamental_solution(problem, &gamma0, period, 1.0, settings.rk_steps)?;
    let tangent = autonomous.then(|| problem.drift(0.0, &gamma0));
    let mono = monodromy(&flow.end(), tangent.as_ref())?;
    Ok(PeriodicOrbit {
        problem: problem.clone(),
        collocation,
        period,
        phase,
        flow,
        monodromy: mono,
        newton_iterations: iterations,
        residual,
    })
}

/// Left eigenvector `w` of `x1` for the multiplier 1, normalized so that `wᵀ f0 = 1`.
pub fn left_eigenvector(x1: &DMatrix<f64>, f0: &DVector<f64>) -> Result<DVector<f64>> {
    let n = x1.nrows();
    let info = monodromy(x1, Some(f0))?;
    let mu = info.trivial_multiplier().expect("autonomous analysis").re;
    let shifted = x1.transpose() - DMatrix::identity(n, n) * mu;
    let (w, smallest, second) = null_vector(&shifted);
    let scale = max_abs(x1).max(1.0);
    if second < 1e-8 * scale || smallest > 1e-6 * scale {
        return Err(Error::NonSimpleMultiplier);
    }
    let others_near_one = info
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, mu)| Some(*i) != info.trivial && (*mu - 1.0).norm() < 1e-6)
        .count();
    if others_near_one > 0 {
        return Err(Error::NonSimpleMultiplier);
    }
    let denom = w.dot(f0);
    if denom.abs() < 1e-12 * w.norm() * f0.norm() {
        return Err(Error::Singular("left eigenvector orthogonal to the tangent".into()));
    }
    Ok(w / denom)
}

/// Initial adjoint vector `w = λ(0)` of an autonomous orbit.
pub fn adjoint_left_vector(orbit: &PeriodicOrbit) -> Result<DVector<f64>> {
    if !orbit.is_autonomous() {
        return Err(Error::InvalidArgument("non-autonomous orbits have no adjoint vector".into()));
    }
    left_eigenvector(&orbit.flow.end(), &orbit.tangent(0.0))
}

/// Solution `λ(t) = X(t)⁻ᵀ w` of the adjoint equation, or nothing for non-autonomous orbits.
#[derive(Debug, Clone)]
pub struct AdjointCycle {
    pub w: Option<DVector<f64>>,
    lambda: Option<Trajectory>,
}

impl AdjointCycle {
    pub fn lambda(&self, t: f64) -> Option<DVector<f64>> {
        self.lambda.as_ref().map(|l| l.eval(t))
    }

    pub fn lambda_deriv(&self, t: f64) -> Option<DVector<f64>> {
        self.lambda.as_ref().map(|l| l.deriv(t))
    }

    pub fn lambda_node(&self, k: usize) -> Option<DVector<f64>> {
        self.lambda.as_ref().map(|l| l.node(k))
    }

    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.lambda.as_ref()
    }
}

/// Adjoint function on the orbit mesh. Pass `None` for non-autonomous orbits.
pub fn adjoint_function(orbit: &PeriodicOrbit, w: Option<&DVector<f64>>) -> Result<AdjointCycle> {
    let Some(w) = w else {
        return Ok(AdjointCycle { w: None, lambda: None });
    };
    let n = orbit.problem.dim();
    if w.len() != n {
        return Err(Error::DimensionMismatch { what: "adjoint vector", expected: n, found: w.len() });
    }
    let steps = orbit.flow.steps();
    let mut values = Vec::with_capacity((steps + 1) * n);
    let mut derivs = Vec::with_capacity((steps + 1) * n);
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let x = orbit.flow.node(k);
        let lam = Lu::new(x.transpose(), "adjoint transport")?.solve_vec(w);
        let jac = orbit.problem.jacobian(t, &orbit.flow.state_node(k));
        let dlam = -(jac.transpose() * &lam) * orbit.period;
        values.extend_from_slice(lam.as_slice());
        derivs.extend_from_slice(dlam.as_slice());
    }
    let lambda = Trajectory::from_hermite(n, 1.0, &values, &derivs)?;
    let out = AdjointCycle { w: Some(w.clone()), lambda: Some(lambda) };
    let drift = adjoint_normalization_drift(orbit, &out);
    if drift > 1e-6 {
        return Err(Error::NotPeriodic(drift));
    }
    Ok(out)
}

/// `max_k |λ(t_k)ᵀ f(γ(t_k)) - 1|` together with `‖λ(1) - λ(0)‖∞`, whichever is larger.
pub fn adjoint_normalization_drift(orbit: &PeriodicOrbit, adjoint: &AdjointCycle) -> f64 {
    let Some(lam) = &adjoint.lambda else { return 0.0 };
    let steps = orbit.flow.steps();
    let mut worst = (lam.node(steps) - lam.node(0)).amax();
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let f = orbit.problem.drift(t, &orbit.flow.state_node(k));
        worst = worst.max((lam.node(k).dot(&f) - 1.0).abs());
    }
    worst
}

/// The family `Q(t) = I - f(γ(t)) λ(t)ᵀ`, or the identity for non-autonomous orbits.
#[derive(Debug, Clone)]
pub struct ProjectionFamily {
    orbit: PeriodicOrbit,
    adjoint: AdjointCycle,
}

impl ProjectionFamily {
    pub fn is_identity(&self) -> bool {
        self.adjoint.lambda.is_none()
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        let n = self.orbit.problem.dim();
        match self.adjoint.lambda(t) {
            None => DMatrix::identity(n, n),
            Some(lam) => DMatrix::identity(n, n) - self.orbit.tangent(t) * lam.transpose(),
        }
    }

    pub fn node(&self, k: usize) -> DMatrix<f64> {
        let n = self.orbit.problem.dim();
        match self.adjoint.lambda_node(k) {
            None => DMatrix::identity(n, n),
            Some(lam) => {
                let t = k as f64 / self.orbit.flow.steps() as f64;
                let f = self.orbit.problem.drift(t, &self.orbit.flow.state_node(k));
                DMatrix::identity(n, n) - f * lam.transpose()
            }
        }
    }

    pub fn adjoint(&self) -> &AdjointCycle {
        &self.adjoint
    }
}

pub fn projection_family(orbit: &PeriodicOrbit, adjoint: &AdjointCycle) -> ProjectionFamily {
    ProjectionFamily { orbit: orbit.clone(), adjoint: adjoint.clone() }
}

/// `∫₀ᵗ G Gᵀ ds` with `G = X⁻¹ F(γ)`, at every orbit mesh point.
#[derive(Debug, Clone)]
pub struct NoiseIntegral {
    cumulative: Vec<DMatrix<f64>>,
}

impl NoiseIntegral {
    /// The full-period integral.
    pub fn total(&self) -> &DMatrix<f64> {
        self.cumulative.last().expect("non-empty mesh")
    }

    pub fn node(&self, k: usize) -> &DMatrix<f64> {
        &self.cumulative[k]
    }
}

/// Composite Gauss–Legendre quadrature (four nodes per RK step) of the noise integral.
pub fn noise_quadrature(orbit: &PeriodicOrbit) -> Result<NoiseIntegral> {
    noise_integral_along(&orbit.problem, &orbit.flow, None)
}

/// Cumulative `∫ X⁻¹ W Wᵀ X⁻ᵀ` where `W = F(γ)` or, if given, `W = weight(t) F(γ)`.
pub(crate) fn noise_integral_along(
    problem: &Problem,
    flow: &FundamentalSolution,
    weight: Option<&dyn Fn(f64) -> DMatrix<f64>>,
) -> Result<NoiseIntegral> {
    let n = problem.dim();
    let steps = flow.steps();
    let h = flow.t_end() / steps as f64;
    let (nodes, weights) = gauss_legendre(4);
    let mut acc = DMatrix::zeros(n, n);
    let mut cumulative = Vec::with_capacity(steps + 1);
    cumulative.push(acc.clone());
    for k in 0..steps {
        for (c, wq) in nodes.iter().zip(&weights) {
            let t = (k as f64 + c) * h;
            let x = flow.at(t);
            let mut fmat = problem.diffusion(t, &flow.state().eval(t));
            if let Some(wf) = weight {
                fmat = wf(t) * fmat;
            }
            let g = Lu::new(x, "noise quadrature")?.solve_mat(&fmat);
            acc += (&g * g.transpose()) * (wq * h);
        }
        cumulative.push(acc.clone());
    }
    Ok(NoiseIntegral { cumulative })
}

/// `C(0)` of the periodic covariance and how it was obtained.
#[derive(Debug, Clone)]
pub struct StationaryCovariance {
    pub c0: DMatrix<f64>,
    pub terms: usize,
    /// `wᵀ C(0) w`, which vanishes on the periodic solution of an autonomous problem.
    pub conserved: f64,
}

/// Terms needed to contract by `10^-28` at the given transversal radius.
fn series_cap(radius: f64) -> usize {
    if radius <= 0.0 {
        return 2;
    }
    let k = -28.0 * core::f64::consts::LN_10 / radius.ln();
    (k.ceil() as usize).clamp(2, 100_000)
}

/// Relative size of the last added term at which the series stops.
pub const SERIES_TOL: f64 = 1e-12;

/// `C(0) = T Σ_{k≥1} Q(0) X(1)ᵏ 𝓘 X(1)ᵏᵀ Q(0)ᵀ`.
pub fn covariance_series(
    orbit: &PeriodicOrbit,
    projection: &ProjectionFamily,
    noise: &NoiseIntegral,
) -> Result<StationaryCovariance> {
    orbit.monodromy.require_transversal_stability()?;
    let x1 = orbit.flow.end();
    let q0 = projection.node(0);
    let cap = series_cap(orbit.monodromy.transversal_radius);
    let mut m = noise.total().clone();
    let mut sum = DMatrix::zeros(x1.nrows(), x1.ncols());
    let mut terms = 0;
    for k in 1..=cap {
        m = &x1 * m * x1.transpose();
        let term = &q0 * &m * q0.transpose() * orbit.period;
        sum += &term;
        terms = k;
        if max_abs(&term) <= SERIES_TOL * max_abs(&sum) {
            break;
        }
    }
    Ok(StationaryCovariance { conserved: conserved_scalar(projection, &sum), c0: sum, terms })
}

fn conserved_scalar(projection: &ProjectionFamily, c0: &DMatrix<f64>) -> f64 {
    match &projection.adjoint.w {
        Some(w) => (w.transpose() * c0 * w)[(0, 0)],
        None => 0.0,
    }
}

/// `C(0)` from the bordered linear system for `vec C(0)`.
pub fn covariance_kronecker(
    orbit: &PeriodicOrbit,
    projection: &ProjectionFamily,
    noise: &NoiseIntegral,
) -> Result<StationaryCovariance> {
    let n = orbit.problem.dim();
    let x1 = orbit.flow.end();
    let q0 = projection.node(0);
    let forcing = &q0 * (&x1 * noise.total() * x1.transpose()) * q0.transpose() * orbit.period;
    let mu = &orbit.monodromy.eigenvalues;
    for i in 0..mu.len() {
        for j in 0..mu.len() {
            if orbit.monodromy.trivial == Some(i) && orbit.monodromy.trivial == Some(j) {
                continue;
            }
            let d = (mu[i] * mu[j] - 1.0).norm();
            if d < 1e-8 {
                return Err(Error::Resonant(format!("multipliers {} and {} multiply to 1", mu[i], mu[j])));
            }
        }
    }
    let kk = kron(&x1, &x1);
    let nn = n * n;
    let c = match &projection.adjoint.w {
        None => {
            let a = DMatrix::identity(nn, nn) - kk;
            Lu::new(a, "Kronecker covariance system")?.solve_vec(&vec_of(&forcing))
        }
        Some(w) => {
            let f0 = orbit.tangent(0.0);
            let ff = vec_of(&(&f0 * f0.transpose()));
            let ww = vec_of(&(w * w.transpose()));
            let mut a = DMatrix::zeros(nn + 1, nn + 1);
            a.view_mut((0, 0), (nn, nn)).copy_from(&(DMatrix::identity(nn, nn) - kk));
            a.view_mut((0, nn), (nn, 1)).copy_from(&ff);
            a.view_mut((nn, 0), (1, nn)).copy_from(&ww.transpose());
            let mut rhs = DVector::zeros(nn + 1);
            rhs.rows_mut(0, nn).copy_from(&vec_of(&forcing));
            let sol = Lu::new(a, "bordered Kronecker covariance system")?.solve_vec(&rhs);
            sol.rows(0, nn).into_owned()
        }
    };
    let c0 = unvec(c.as_slice(), n, n);
    Ok(StationaryCovariance { conserved: conserved_scalar(projection, &c0), c0, terms: 0 })
}

/// Periodic covariance on the orbit mesh with consistency diagnostics.
#[derive(Debug, Clone)]
pub struct CovarianceCycle {
    dim: usize,
    curve: Trajectory,
    /// `max_k ‖C_ode(t_k) - C(t_k)‖∞` between the integrated Lyapunov equation and the closed form.
    pub ode_discrepancy: f64,
    /// `‖C_ode(1) - C(0)‖∞`.
    pub periodicity_defect: f64,
    /// Growth of `λᵀ C λ` over one period divided by `T`; zero on the periodic solution.
    pub symmetry_breaking: f64,
    /// `wᵀ C(0) w`.
    pub conserved: f64,
}

impl CovarianceCycle {
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        self.curve.eval_matrix(t, self.dim)
    }

    pub fn node(&self, k: usize) -> DMatrix<f64> {
        self.curve.node_matrix(k, self.dim)
    }

    pub fn steps(&self) -> usize {
        self.curve.intervals()
    }

    pub fn mesh(&self) -> Vec<f64> {
        self.curve.mesh()
    }
}

/// Tolerance on the periodicity of the integrated Lyapunov equation.
pub const LYAPUNOV_PERIODICITY_TOL: f64 = 1e-6;

/// `C(t) = X C₀ Xᵀ + T Q X (∫₀ᵗ G Gᵀ) Xᵀ Qᵀ` on the mesh, cross-checked by RK4 integration of
/// `Ċ = T (Df C + C Dfᵀ + Q F Fᵀ Qᵀ)`.
pub fn propagate_covariance(
    orbit: &PeriodicOrbit,
    projection: &ProjectionFamily,
    noise: &NoiseIntegral,
    c0: &DMatrix<f64>,
) -> Result<CovarianceCycle> {
    let n = orbit.problem.dim();
    let steps = orbit.flow.steps();
    let period = orbit.period;
    let lyap = |t: f64, c: &DMatrix<f64>| -> DMatrix<f64> {
        let x = orbit.gamma(t);
        let j = orbit.problem.jacobian(t, &x);
        let qf = projection.at(t) * orbit.problem.diffusion(t, &x);
        (&j * c + c * j.transpose() + &qf * qf.transpose()) * period
    };
    let mut values = Vec::with_capacity((steps + 1) * n * n);
    let mut derivs = Vec::with_capacity((steps + 1) * n * n);
    let mut closed = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let x = orbit.flow.node(k);
        let q = projection.node(k);
        let c = &x * c0 * x.transpose() + &q * (&x * noise.node(k) * x.transpose()) * q.transpose() * period;
        let c = (&c + c.transpose()) * 0.5;
        let state = orbit.flow.state_node(k);
        let j = orbit.problem.jacobian(t, &state);
        let qf = &q * orbit.problem.diffusion(t, &state);
        let dc = (&j * &c + &c * j.transpose() + &qf * qf.transpose()) * period;
        values.extend_from_slice(c.as_slice());
        derivs.extend_from_slice(dc.as_slice());
        closed.push(c);
    }
    let h = 1.0 / steps as f64;
    let mut c = c0.clone();
    let mut discrepancy = 0.0f64;
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = lyap(t, &c);
        let k2 = lyap(t + 0.5 * h, &(&c + &k1 * (0.5 * h)));
        let k3 = lyap(t + 0.5 * h, &(&c + &k2 * (0.5 * h)));
        let k4 = lyap(t + h, &(&c + &k3 * h));
        c += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        discrepancy = discrepancy.max(max_abs(&(&c - &closed[k + 1])));
    }
    let periodicity_defect = max_abs(&(&c - c0));
    let symmetry_breaking = match &projection.adjoint.lambda {
        Some(lam) => {
            let l0 = lam.node(0);
            let l1 = lam.node(steps);
            ((l1.transpose() * &c * &l1)[(0, 0)] - (l0.transpose() * c0 * &l0)[(0, 0)]) / period
        }
        None => 0.0,
    };
    if periodicity_defect > LYAPUNOV_PERIODICITY_TOL * max_abs(c0).max(1.0) {
        return Err(Error::NotPeriodic(periodicity_defect));
    }
    Ok(CovarianceCycle {
        dim: n,
        curve: Trajectory::from_hermite(n * n, 1.0, &values, &derivs)?,
        ode_discrepancy: discrepancy,
        periodicity_defect,
        symmetry_breaking,
        conserved: conserved_scalar(projection, c0),
    })
}

/// Eigenvalues (descending) and unit eigenvectors of `C(t)` along a time grid.
#[derive(Debug, Clone)]
pub struct Eigencurves {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Eigenvectors as columns, signs chosen continuously in `t`.
    pub vectors: Vec<DMatrix<f64>>,
}

/// Eigen-decomposition of `C(t)` at every mesh point of the covariance.
pub fn covariance_eigens(cov: &CovarianceCycle) -> Eigencurves {
    let times = cov.mesh();
    let mats: Vec<DMatrix<f64>> = (0..times.len()).map(|k| cov.node(k)).collect();
    eigencurves_of(times, &mats)
}

/// Eigen-decomposition of a sequence of symmetric matrices with continuous eigenvector signs.
pub fn eigencurves_of(times: Vec<f64>, mats: &[DMatrix<f64>]) -> Eigencurves {
    let mut values = Vec::with_capacity(mats.len());
    let mut vectors: Vec<DMatrix<f64>> = Vec::with_capacity(mats.len());
    for m in mats {
        let (vals, mut vecs) = sorted_symmetric_eigen(m);
        for j in 0..vecs.ncols() {
            let flip = match vectors.last() {
                Some(prev) => prev.column(j).dot(&vecs.column(j)) < 0.0,
                None => {
                    let col = vecs.column(j);
                    let imax = col.iamax();
                    col[imax] < 0.0
                }
            };
            if flip {
                vecs.column_mut(j).neg_mut();
            }
        }
        values.push(vals);
        vectors.push(vecs);
    }
    Eigencurves { times, values, vectors }
}
