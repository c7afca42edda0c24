//! Quasiperiodic invariant tori with one torus angle: the torus itself, its adjoint
//! foliation, the projection family and the stationary covariance of transversal deviations.
//!
//! The torus is sampled at the `2N + 1` Fourier nodes `φ_j`; each sample is a segment
//! `γ_j(t) = γ(φ_j, t)` on `t ∈ [0, 1]`, coupled through `γ(φ, 1) = γ(φ + ρ, 0)`.
//! The rotation number `ρ` is fixed, so one parameter of the problem is solved for; for
//! autonomous problems the period is an unknown as well. Downstream quantities use
//! fine RK4 flows started from the collocated segment heads.

#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::collocation::{CollocationScheme, FreeScalars, gauss_legendre, linearize_segment};
use crate::error::{Error, Result};
use crate::flow::{FundamentalSolution, fundamental_solution};
use crate::fourier::FourierOps;
use crate::linalg::{Lu, kron, max_abs, range_basis, spectral_norm, symmetrize, unvec, vec_of};
use crate::model::Problem;
use crate::trajectory::Trajectory;

/// Discretization and Newton settings for tori.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusSettings {
    pub modes: usize,
    pub intervals: usize,
    pub degree: usize,
    pub rk_steps: usize,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for TorusSettings {
    fn default() -> Self {
        Self { modes: 14, intervals: 20, degree: 4, rk_steps: 4000, newton_tol: 1e-10, max_newton: 20 }
    }
}

/// A converged torus with fine flows along every node segment.
#[derive(Debug, Clone)]
pub struct TorusSolution {
    problem: Problem,
    ops: FourierOps,
    rho: f64,
    period: f64,
    free_param: String,
    segments: Vec<Trajectory>,
    flows: Vec<FundamentalSolution>,
    /// `∂_φ γ(φ_j, ·)` from spectral differentiation of the fine flows.
    dphi: Vec<Trajectory>,
    /// Gradients of the phase conditions, applied to the first node at `t = 0`.
    phase_normals: Vec<DVector<f64>>,
    shift: DMatrix<f64>,
    newton_iterations: usize,
    residual: f64,
}

/// Solves for the torus with rotation number `rho`, treating `free_param` as unknown.
///
/// `guess(φ, t)` seeds every node segment. Autonomous problems also solve for the period
/// and carry two phase conditions (time shift and angle shift); non-autonomous problems
/// carry only the angle condition and keep `period_guess` fixed.
pub fn solve_torus(
    problem: &Problem,
    guess: &dyn Fn(f64, f64) -> DVector<f64>,
    period_guess: f64,
    rho: f64,
    free_param: &str,
    settings: &TorusSettings,
) -> Result<TorusSolution> {
    let n = problem.dim();
    let ops = FourierOps::new(settings.modes)?;
    if !(period_guess > 0.0 && period_guess.is_finite()) || !rho.is_finite() {
        return Err(Error::InvalidArgument("period guess must be positive and ρ finite".into()));
    }
    let pidx = problem.param_index(free_param)?;
    let scheme = CollocationScheme::new(settings.intervals, settings.degree)?;
    let nodes = ops.size();
    let mut values: Vec<Vec<f64>> = ops
        .nodes()
        .iter()
        .map(|&phi| scheme.sample(n, &|t| guess(phi, t)))
        .collect::<Result<_>>()?;
    let autonomous = problem.is_autonomous();
    let shift = ops.nodal_shift(rho);
    let dn = ops.nodal_derivative();

    let anchor = DVector::from_column_slice(&values[0][..n]);
    let mut normals = Vec::new();
    if autonomous {
        normals.push(problem.drift(0.0, &anchor) * period_guess);
    }
    let mut dphi0 = DVector::zeros(n);
    for l in 0..nodes {
        dphi0.axpy(dn[(0, l)], &DVector::from_column_slice(&values[l][..n]), 1.0);
    }
    normals.push(dphi0);

    let free = FreeScalars { period: autonomous, param: Some(pidx) };
    let nq = free.count();
    let size = nodes * n + nq;
    let mut params = problem.param_values().to_vec();
    let mut period = period_guess;
    let last = (scheme.base_points() - 1) * n;
    let mut iterations = 0;
    let mut residual;
    loop {
        let mut conds = Vec::with_capacity(nodes);
        let mut res = 0.0f64;
        for seg in &values {
            let (c, r) = linearize_segment(problem, &scheme, seg, period, &params, free)?;
            res = res.max(r);
            conds.push(c);
        }
        let mut jac = DMatrix::zeros(size, size);
        let mut rhs = DVector::zeros(size);
        for j in 0..nodes {
            let end = DVector::from_column_slice(&values[j][last..last + n]);
            let mut target = DVector::zeros(n);
            for l in 0..nodes {
                let w = shift[(j, l)];
                target.axpy(w, &DVector::from_column_slice(&values[l][..n]), 1.0);
                for r in 0..n {
                    jac[(j * n + r, l * n + r)] -= w;
                }
            }
            let mut block = jac.view_mut((j * n, j * n), (n, n));
            block += &conds[j].phi;
            jac.view_mut((j * n, nodes * n), (n, nq)).copy_from(&conds[j].phi_q);
            res = res.max((&end - &target).amax());
            rhs.rows_mut(j * n, n).copy_from(&(target - end - &conds[j].phi_g));
        }
        let x10 = DVector::from_column_slice(&values[0][..n]);
        for (i, normal) in normals.iter().enumerate() {
            let r = normal.dot(&(&x10 - &anchor));
            res = res.max(r.abs());
            jac.view_mut((nodes * n + i, 0), (1, n)).copy_from(&normal.transpose());
            rhs[nodes * n + i] = -r;
        }
        residual = res;
        if !res.is_finite() || res > 1e8 {
            return Err(Error::NewtonDivergence(format!("torus residual {res:e} after {iterations} steps")));
        }
        if res < settings.newton_tol {
            break;
        }
        if iterations >= settings.max_newton {
            return Err(Error::NewtonDivergence(format!(
                "torus residual {res:e} after {iterations} steps (cap reached)"
            )));
        }
        let step = Lu::new(jac, "torus Newton system")?.solve_vec(&rhs);
        let dq = step.rows(nodes * n, nq).into_owned();
        for j in 0..nodes {
            let delta = conds[j].expand(&step.rows(j * n, n).into_owned(), &dq);
            values[j].iter_mut().zip(&delta).for_each(|(v, d)| *v += d);
        }
        if autonomous {
            period += dq[0];
            if !(period > 0.0) {
                return Err(Error::NewtonDivergence(format!("period became {period}")));
            }
        }
        params[pidx] += dq[nq - 1];
        iterations += 1;
    }
    let segments = values
        .iter()
        .map(|v| scheme.trajectory(n, v))
        .collect::<Result<Vec<_>>>()?;
    let problem = problem.with_param_values(&params)?;
    let mut sol = TorusSolution::from_segments(
        &problem,
        settings.modes,
        rho,
        period,
        free_param,
        segments,
        normals,
        settings.rk_steps,
    )?;
    sol.newton_iterations = iterations;
    sol.residual = residual;
    Ok(sol)
}

impl TorusSolution {
    /// Rebuilds the fine flows from converged collocation segments.
    #[allow(clippy::too_many_arguments)]
    pub fn from_segments(
        problem: &Problem,
        modes: usize,
        rho: f64,
        period: f64,
        free_param: &str,
        segments: Vec<Trajectory>,
        phase_normals: Vec<DVector<f64>>,
        rk_steps: usize,
    ) -> Result<Self> {
        let ops = FourierOps::new(modes)?;
        let n = problem.dim();
        if segments.len() != ops.size() {
            return Err(Error::DimensionMismatch { what: "torus segments", expected: ops.size(), found: segments.len() });
        }
        let expected_normals = if problem.is_autonomous() { 2 } else { 1 };
        if phase_normals.len() != expected_normals || phase_normals.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch {
                what: "phase conditions",
                expected: expected_normals,
                found: phase_normals.len(),
            });
        }
        let flows = segments
            .iter()
            .map(|s| fundamental_solution(problem, &s.eval(0.0), period, 1.0, rk_steps))
            .collect::<Result<Vec<_>>>()?;
        // `∂_φ γ` is differentiated spectrally at `t = 0` and then transported by the
        // linearized flow, so the tangent bundle is exactly invariant along each segment.
        let dn = ops.nodal_derivative();
        let mut dphi = Vec::with_capacity(segments.len());
        for j in 0..segments.len() {
            let mut d0 = DVector::zeros(n);
            for (l, flow) in flows.iter().enumerate() {
                d0.axpy(dn[(j, l)], &flow.state_node(0), 1.0);
            }
            let mut values = Vec::with_capacity((rk_steps + 1) * n);
            let mut derivs = Vec::with_capacity((rk_steps + 1) * n);
            for k in 0..=rk_steps {
                let t = k as f64 / rk_steps as f64;
                let v = flows[j].node(k) * &d0;
                let d = problem.jacobian(t, &flows[j].state_node(k)) * &v * period;
                values.extend_from_slice(v.as_slice());
                derivs.extend_from_slice(d.as_slice());
            }
            dphi.push(Trajectory::from_hermite(n, 1.0, &values, &derivs)?);
        }
        let shift = ops.nodal_shift(rho);
        Ok(Self {
            problem: problem.clone(),
            ops,
            rho,
            period,
            free_param: free_param.into(),
            segments,
            flows,
            dphi,
            phase_normals,
            shift,
            newton_iterations: 0,
            residual: 0.0,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn ops(&self) -> &FourierOps {
        &self.ops
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn free_param(&self) -> &str {
        &self.free_param
    }

    pub fn segments(&self) -> &[Trajectory] {
        &self.segments
    }

    pub fn flows(&self) -> &[FundamentalSolution] {
        &self.flows
    }

    pub fn phase_normals(&self) -> &[DVector<f64>] {
        &self.phase_normals
    }

    pub fn newton_iterations(&self) -> usize {
        self.newton_iterations
    }

    pub fn newton_residual(&self) -> f64 {
        self.residual
    }

    pub fn node_count(&self) -> usize {
        self.ops.size()
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn rk_steps(&self) -> usize {
        self.flows[0].steps()
    }

    /// Number of tangent directions: time and angle, or angle only.
    pub fn tangent_count(&self) -> usize {
        if self.problem.is_autonomous() { 2 } else { 1 }
    }

    /// `γ(φ_j, t)` from the fine flow.
    pub fn gamma(&self, j: usize, t: f64) -> DVector<f64> {
        self.flows[j].state().eval(t)
    }

    /// `∂_t γ(φ_j, t) = T f(t, γ)`.
    pub fn dt_gamma(&self, j: usize, t: f64) -> DVector<f64> {
        self.problem.drift(t, &self.gamma(j, t)) * self.period
    }

    /// `∂_φ γ(φ_j, t)`.
    pub fn dphi_gamma(&self, j: usize, t: f64) -> DVector<f64> {
        self.dphi[j].eval(t)
    }

    /// Tangent matrix `∇ = (∂_t γ, ∂_φ γ)` or `(∂_φ γ)` for non-autonomous problems.
    pub fn tangents(&self, j: usize, t: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, self.tangent_count());
        let mut col = 0;
        if self.problem.is_autonomous() {
            out.set_column(0, &self.dt_gamma(j, t));
            col = 1;
        }
        out.set_column(col, &self.dphi_gamma(j, t));
        out
    }

    /// `γ(φ, t)` at an arbitrary angle by trigonometric interpolation.
    pub fn gamma_at(&self, phi: f64, t: f64) -> DVector<f64> {
        let w = self.ops.interpolation_weights(phi);
        let mut out = DVector::zeros(self.dim());
        for j in 0..self.node_count() {
            out.axpy(w[j], &self.gamma(j, t), 1.0);
        }
        out
    }

    /// Largest violation of `γ(·, 1) = γ(· + ρ, 0)` on the collocated segments.
    pub fn boundary_defect(&self) -> f64 {
        let heads: Vec<DVector<f64>> = self.segments.iter().map(|s| s.eval(0.0)).collect();
        let tails: Vec<DVector<f64>> = self.segments.iter().map(|s| s.eval(1.0)).collect();
        self.shift_defect(&heads, &tails)
    }

    /// The same defect for the fine flows started from the segment heads; it measures the
    /// collocation error in `t`.
    pub fn flow_boundary_defect(&self) -> f64 {
        let steps = self.rk_steps();
        let heads: Vec<DVector<f64>> = self.flows.iter().map(|f| f.state_node(0)).collect();
        let tails: Vec<DVector<f64>> = self.flows.iter().map(|f| f.state_node(steps)).collect();
        self.shift_defect(&heads, &tails)
    }

    fn shift_defect(&self, heads: &[DVector<f64>], tails: &[DVector<f64>]) -> f64 {
        let mut worst = 0.0f64;
        for (j, tail) in tails.iter().enumerate() {
            let mut target = DVector::zeros(self.dim());
            for (l, head) in heads.iter().enumerate() {
                target.axpy(self.shift[(j, l)], head, 1.0);
            }
            worst = worst.max((tail - target).amax());
        }
        worst
    }

    /// Largest gap between transported angle tangents at `t = 1` and the angular shift of
    /// their values at `t = 0`; measures the truncation of the Fourier representation.
    pub fn cocycle_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.node_count() {
            let mut target = DVector::zeros(self.dim());
            for l in 0..self.node_count() {
                target.axpy(self.shift[(j, l)], &self.dphi[l].eval(0.0), 1.0);
            }
            worst = worst.max((self.dphi[j].eval(1.0) - target).amax());
        }
        worst
    }

    /// Nodal map `g ↦ g(· + ρ)`.
    pub fn nodal_shift(&self) -> &DMatrix<f64> {
        &self.shift
    }
}

/// Adjoint functions `λ_t`, `λ_φ` along every node segment.
#[derive(Debug, Clone)]
pub struct TorusAdjoints {
    /// Multipliers of the phase-condition gradients in the discrete boundary condition.
    pub kappa_t: Option<DVector<f64>>,
    pub kappa_phi: DVector<f64>,
    lambda_t: Option<Vec<Trajectory>>,
    lambda_phi: Vec<Trajectory>,
    /// Largest `|Ωᵀ ∇ - I|` at the nodes before the pointwise rescaling.
    pub normalization_defect: f64,
}

impl TorusAdjoints {
    pub fn lambda_t(&self, j: usize, t: f64) -> Option<DVector<f64>> {
        self.lambda_t.as_ref().map(|l| l[j].eval(t))
    }

    pub fn lambda_phi(&self, j: usize, t: f64) -> DVector<f64> {
        self.lambda_phi[j].eval(t)
    }

    pub fn lambda_t_deriv(&self, j: usize, t: f64) -> Option<DVector<f64>> {
        self.lambda_t.as_ref().map(|l| l[j].deriv(t))
    }

    pub fn lambda_phi_deriv(&self, j: usize, t: f64) -> DVector<f64> {
        self.lambda_phi[j].deriv(t)
    }

    /// `w_t(φ_j) = λ_t(φ_j, 0)`.
    pub fn w_t(&self, j: usize) -> Option<DVector<f64>> {
        self.lambda_t(j, 0.0)
    }

    /// `w_φ(φ_j) = λ_φ(φ_j, 0)`.
    pub fn w_phi(&self, j: usize) -> DVector<f64> {
        self.lambda_phi(j, 0.0)
    }

    /// `Λ = (λ_t, λ_φ)` or `(λ_φ)` as columns.
    pub fn lambda(&self, j: usize, t: f64) -> DMatrix<f64> {
        let lp = self.lambda_phi(j, t);
        match self.lambda_t(j, t) {
            Some(lt) => DMatrix::from_columns(&[lt, lp]),
            None => DMatrix::from_columns(&[lp]),
        }
    }

    /// `Λ` at `t = 0`, the matrix `Ω(φ_j)` of the boundary conditions.
    pub fn omega(&self, j: usize) -> DMatrix<f64> {
        self.lambda(j, 0.0)
    }
}

/// Solves the discrete adjoint boundary-value problem for both tangent directions.
pub fn torus_adjoints(sol: &TorusSolution) -> Result<TorusAdjoints> {
    let n = sol.dim();
    let nodes = sol.node_count();
    let autonomous = sol.problem.is_autonomous();
    let pc = sol.phase_normals.len();
    let steps = sol.rk_steps();
    let size = nodes * n + pc;
    let shift = &sol.shift;
    let dn = sol.ops.nodal_derivative();
    let shifted_dphi = shift * &dn;
    let mut jac = DMatrix::zeros(size, size);
    let mut x1inv = Vec::with_capacity(nodes);
    for j in 0..nodes {
        let inv = sol.flows[j].inverse_node(steps)?;
        jac.view_mut((j * n, j * n), (n, n)).copy_from(&inv.transpose());
        for l in 0..nodes {
            for r in 0..n {
                jac[(j * n + r, l * n + r)] -= shift[(j, l)];
            }
        }
        for (i, normal) in sol.phase_normals.iter().enumerate() {
            jac.view_mut((j * n, nodes * n + i), (n, 1)).copy_from(&(normal * shift[(j, 0)]));
        }
        x1inv.push(inv);
    }
    let scale = 1.0 / nodes as f64;
    let mut row = nodes * n;
    if autonomous {
        let (qn, qw) = gauss_legendre(4);
        let h = 1.0 / steps as f64;
        for j in 0..nodes {
            let mut v = DVector::zeros(n);
            for k in 0..steps {
                for (c, wq) in qn.iter().zip(&qw) {
                    let t = (k as f64 + c) * h;
                    let xs = sol.flows[j].at(t);
                    let f = sol.dt_gamma(j, t);
                    v += Lu::new(xs, "adjoint normalization")?.solve_vec(&f) * (wq * h);
                }
            }
            jac.view_mut((row, j * n), (1, n)).copy_from(&(v.transpose() * scale));
        }
        row += 1;
    }
    for j in 0..nodes {
        let mut d1 = DVector::zeros(n);
        for l in 0..nodes {
            d1.axpy(shifted_dphi[(j, l)], &sol.flows[l].state_node(0), 1.0);
        }
        let coeff = &x1inv[j] * d1;
        jac.view_mut((row, j * n), (1, n)).copy_from(&(coeff.transpose() * scale));
    }
    let lu = Lu::new(jac, "torus adjoint system")?;
    let solve_for = |s_value: f64, rho_value: f64| -> (DVector<f64>, DVector<f64>) {
        let mut rhs = DVector::zeros(size);
        let mut r = nodes * n;
        if autonomous {
            rhs[r] = s_value;
            r += 1;
        }
        rhs[r] = rho_value;
        let x = lu.solve_vec(&rhs);
        (x.rows(0, nodes * n).into_owned(), x.rows(nodes * n, pc).into_owned())
    };
    let (heads_phi, kappa_phi) = solve_for(0.0, 1.0);
    let (heads_t, kappa_t) = if autonomous {
        let (h, k) = solve_for(1.0, 0.0);
        (Some(h), Some(k))
    } else {
        (None, None)
    };
    // The discrete conditions fix the pairings with the tangents only on average over the
    // nodes; each node is rescaled so that `Ωᵀ ∇ = I` holds pointwise.
    let k = sol.tangent_count();
    let mut defect = 0.0f64;
    let mut lambda_phi = Vec::with_capacity(nodes);
    let mut lambda_t = Vec::with_capacity(nodes);
    for j in 0..nodes {
        let mut omega = DMatrix::zeros(n, k);
        if let Some(h) = &heads_t {
            omega.set_column(0, &h.rows(j * n, n));
        }
        omega.set_column(k - 1, &heads_phi.rows(j * n, n));
        let gram = omega.transpose() * sol.tangents(j, 0.0);
        defect = defect.max(max_abs(&(&gram - DMatrix::identity(k, k))));
        let omega = omega * Lu::new(gram.transpose(), "adjoint normalization")?.inverse();
        lambda_phi.push(transport_adjoint(sol, j, &omega.column(k - 1).into_owned())?);
        if autonomous {
            lambda_t.push(transport_adjoint(sol, j, &omega.column(0).into_owned())?);
        }
    }
    Ok(TorusAdjoints {
        kappa_t,
        kappa_phi,
        lambda_t: autonomous.then_some(lambda_t),
        lambda_phi,
        normalization_defect: defect,
    })
}

fn transport_adjoint(sol: &TorusSolution, j: usize, m0: &DVector<f64>) -> Result<Trajectory> {
    let n = sol.dim();
    let steps = sol.rk_steps();
    let flow = &sol.flows[j];
    let mut values = Vec::with_capacity((steps + 1) * n);
    let mut derivs = Vec::with_capacity((steps + 1) * n);
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let lam = Lu::new(flow.node(k).transpose(), "torus adjoint transport")?.solve_vec(m0);
        let jac = sol.problem.jacobian(t, &flow.state_node(k));
        let dlam = -(jac.transpose() * &lam) * sol.period;
        values.extend_from_slice(lam.as_slice());
        derivs.extend_from_slice(dlam.as_slice());
    }
    Trajectory::from_hermite(n, 1.0, &values, &derivs)
}

/// Largest deviation of `Λᵀ ∇` from the identity over all nodes and `samples + 1` times.
pub fn adjoint_normalization_error(sol: &TorusSolution, adj: &TorusAdjoints, samples: usize) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..sol.node_count() {
        for k in 0..=samples {
            let t = k as f64 / samples as f64;
            let g = adj.lambda(j, t).transpose() * sol.tangents(j, t);
            let id = DMatrix::identity(g.nrows(), g.ncols());
            worst = worst.max(max_abs(&(g - id)));
        }
    }
    worst
}

/// Projections `Q(φ_j, t) = I - ∇ Λᵀ` onto the transversal hyperplanes.
#[derive(Debug, Clone)]
pub struct TorusProjection {
    sol: TorusSolution,
    adj: TorusAdjoints,
}

impl TorusProjection {
    pub fn at(&self, j: usize, t: f64) -> DMatrix<f64> {
        let n = self.sol.dim();
        DMatrix::identity(n, n) - self.sol.tangents(j, t) * self.adj.lambda(j, t).transpose()
    }

    pub fn solution(&self) -> &TorusSolution {
        &self.sol
    }

    pub fn adjoints(&self) -> &TorusAdjoints {
        &self.adj
    }
}

pub fn torus_projection(sol: &TorusSolution, adj: &TorusAdjoints) -> TorusProjection {
    TorusProjection { sol: sol.clone(), adj: adj.clone() }
}

/// How the stationary torus covariance is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TorusCovarianceMethod {
    /// Iterate the one-period map shifted back by `ρ`, starting from zero.
    FixedPoint,
    /// Solve the boundary-value problem for `C(φ_j, 0)` and the regularizing matrix `A`.
    Direct,
}

/// Stationary covariance at the torus nodes.
#[derive(Debug, Clone)]
pub struct TorusCovariance {
    pub method: TorusCovarianceMethod,
    /// `C(φ_j, 0)`.
    pub c0: Vec<DMatrix<f64>>,
    /// Regularizing matrix; zero for the fixed-point method.
    pub a: DMatrix<f64>,
    pub a_norm: f64,
    pub iterations: usize,
    /// Largest `|Ω(φ_j)ᵀ C(φ_j, 0) Ω(φ_j)|` of the solve, before projection.
    pub zero_level: f64,
    /// Relative size of the tangential part removed from the solved node covariances.
    pub tangential_leak: f64,
    /// Transversal contraction estimate used to cap the fixed-point iteration.
    pub contraction_estimate: f64,
    noise: Vec<Vec<DMatrix<f64>>>,
}

/// Fixed-point increment below which the iteration stops.
pub const FIXED_POINT_TOL: f64 = 1e-10;

impl TorusCovariance {
    /// `C(φ_j, t_k)` on the fine mesh by propagating `C(φ_j, 0)`.
    pub fn node_at(&self, proj: &TorusProjection, j: usize, k: usize) -> DMatrix<f64> {
        let sol = &proj.sol;
        let steps = sol.rk_steps();
        let t = k as f64 / steps as f64;
        let x = sol.flows[j].node(k);
        let q = proj.at(j, t);
        let c = &x * &self.c0[j] * x.transpose() + &q * (&x * &self.noise[j][k] * x.transpose()) * q.transpose() * sol.period;
        symmetrize(&c)
    }

    /// Largest `‖C(φ_j, 1) - C(φ_j + ρ, 0)‖` with the shift applied entrywise at the nodes.
    pub fn quasiperiodicity_defect(&self, proj: &TorusProjection) -> f64 {
        let sol = &proj.sol;
        let steps = sol.rk_steps();
        let mut worst = 0.0f64;
        for j in 0..sol.node_count() {
            let mut target = DMatrix::zeros(sol.dim(), sol.dim());
            for l in 0..sol.node_count() {
                target += &self.c0[l] * sol.shift[(j, l)];
            }
            worst = worst.max((self.node_at(proj, j, steps) - target).norm());
        }
        worst
    }

    /// Largest `|Λᵀ C Λ|` over all nodes and `samples + 1` mesh times.
    pub fn level_drift(&self, proj: &TorusProjection, samples: usize) -> f64 {
        let sol = &proj.sol;
        let steps = sol.rk_steps();
        let mut worst = 0.0f64;
        for j in 0..sol.node_count() {
            for s in 0..=samples {
                let k = s * steps / samples;
                let lam = proj.adj.lambda(j, k as f64 / steps as f64);
                worst = worst.max(max_abs(&(lam.transpose() * self.node_at(proj, j, k) * lam)));
            }
        }
        worst
    }

    /// `C(φ, t_k)` at an arbitrary angle by entrywise trigonometric interpolation.
    pub fn at(&self, proj: &TorusProjection, phi: f64, k: usize) -> DMatrix<f64> {
        let w = proj.sol.ops.interpolation_weights(phi);
        let n = proj.sol.dim();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..proj.sol.node_count() {
            out += self.node_at(proj, j, k) * w[j];
        }
        out
    }
}

/// Cumulative `∫₀ᵗ X⁻¹ F Fᵀ X⁻ᵀ` on the fine mesh of every node segment.
fn torus_noise(sol: &TorusSolution) -> Result<Vec<Vec<DMatrix<f64>>>> {
    let n = sol.dim();
    let steps = sol.rk_steps();
    let h = 1.0 / steps as f64;
    let (qn, qw) = gauss_legendre(4);
    let mut out = Vec::with_capacity(sol.node_count());
    for flow in &sol.flows {
        let mut acc = DMatrix::zeros(n, n);
        let mut cum = Vec::with_capacity(steps + 1);
        cum.push(acc.clone());
        for s in 0..steps {
            for (c, wq) in qn.iter().zip(&qw) {
                let t = (s as f64 + c) * h;
                let fmat = sol.problem.diffusion(t, &flow.state().eval(t));
                let g = Lu::new(flow.at(t), "torus noise quadrature")?.solve_mat(&fmat);
                acc += (&g * g.transpose()) * (wq * h);
            }
            cum.push(acc.clone());
        }
        out.push(cum);
    }
    Ok(out)
}

/// Largest one-period gain of the transversal part of the linearized flow over all nodes.
pub fn transversal_contraction(proj: &TorusProjection) -> f64 {
    let sol = &proj.sol;
    let n = sol.dim();
    let rank = n - sol.tangent_count();
    if rank == 0 {
        return 0.0;
    }
    let steps = sol.rk_steps();
    (0..sol.node_count())
        .map(|j| {
            let u0 = range_basis(&proj.at(j, 0.0), rank);
            let u1 = range_basis(&proj.at(j, 1.0), rank);
            spectral_norm(&(u1.transpose() * sol.flows[j].node(steps) * u0))
        })
        .fold(0.0, f64::max)
}

/// Stationary covariance at the nodes by the chosen method.
pub fn torus_covariance(proj: &TorusProjection, method: TorusCovarianceMethod) -> Result<TorusCovariance> {
    let sol = &proj.sol;
    let n = sol.dim();
    let nodes = sol.node_count();
    let steps = sol.rk_steps();
    let k = sol.tangent_count();
    let contraction = transversal_contraction(proj);
    if !(contraction < 1.0) {
        return Err(Error::NotTransversallyStable(contraction));
    }
    let noise = torus_noise(sol)?;
    let x1: Vec<DMatrix<f64>> = sol.flows.iter().map(|f| f.node(steps)).collect();
    let (c0, a, iterations) = match method {
        TorusCovarianceMethod::FixedPoint => {
            let back = sol.ops.nodal_shift(-sol.rho);
            let forcing: Vec<DMatrix<f64>> = (0..nodes)
                .map(|j| {
                    let q1 = proj.at(j, 1.0);
                    &q1 * (&x1[j] * &noise[j][steps] * x1[j].transpose()) * q1.transpose() * sol.period
                })
                .collect();
            let cap = if contraction > 0.0 {
                ((-16.0 * core::f64::consts::LN_10 / contraction.ln()).ceil() as usize).clamp(2, 1_000_000)
            } else {
                2
            };
            // The angular shift mixes nodes, so truncation leaks into the neutral tangent
            // directions; projecting back keeps `C = Q C Qᵀ`, which the exact solution obeys.
            let heads: Vec<DMatrix<f64>> = (0..nodes).map(|j| proj.at(j, 0.0)).collect();
            let mut c = vec![DMatrix::zeros(n, n); nodes];
            let mut iterations = 0;
            let mut converged = false;
            while iterations < cap {
                let d: Vec<DMatrix<f64>> =
                    (0..nodes).map(|j| &x1[j] * &c[j] * x1[j].transpose() + &forcing[j]).collect();
                let mut change = 0.0f64;
                let mut size = 1.0f64;
                let mut next = Vec::with_capacity(nodes);
                for j in 0..nodes {
                    let mut cj = DMatrix::zeros(n, n);
                    for (l, dl) in d.iter().enumerate() {
                        cj += dl * back[(j, l)];
                    }
                    let cj = &heads[j] * cj * heads[j].transpose();
                    change = change.max((&cj - &c[j]).norm());
                    size = size.max(cj.norm());
                    next.push(cj);
                }
                c = next;
                iterations += 1;
                if change < FIXED_POINT_TOL * size {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NotConverged(format!("fixed-point covariance after {iterations} iterations")));
            }
            (c.iter().map(symmetrize).collect::<Vec<_>>(), DMatrix::zeros(k, k), iterations)
        }
        TorusCovarianceMethod::Direct => {
            let nn = n * n;
            let size = nodes * nn + k * k;
            let mut jac = DMatrix::zeros(size, size);
            let mut rhs = DVector::zeros(size);
            for j in 0..nodes {
                jac.view_mut((j * nn, j * nn), (nn, nn)).copy_from(&kron(&x1[j], &x1[j]));
                for l in 0..nodes {
                    let w = sol.shift[(j, l)];
                    for r in 0..nn {
                        jac[(j * nn + r, l * nn + r)] -= w;
                    }
                }
                // Flow invariance turns `X⁻¹ Q(t)` into `Q(0) X⁻¹` and `X⁻¹ ∇(t)` into `∇(0)`.
                let grad = &x1[j] * sol.tangents(j, 0.0);
                for b in 0..k {
                    for a in 0..k {
                        let y = grad.column(a) * grad.column(b).transpose() * sol.period;
                        jac.view_mut((j * nn, nodes * nn + b * k + a), (nn, 1)).copy_from(&vec_of(&y));
                    }
                }
                let q0 = proj.at(j, 0.0);
                let p = &x1[j] * (&q0 * &noise[j][steps] * q0.transpose()) * x1[j].transpose() * sol.period;
                rhs.rows_mut(j * nn, nn).copy_from(&(-vec_of(&p)));
            }
            let omega = proj.adj.omega(0);
            for b in 0..k {
                for a in 0..k {
                    let m = omega.column(a) * omega.column(b).transpose();
                    jac.view_mut((nodes * nn + b * k + a, 0), (1, nn)).copy_from(&vec_of(&m).transpose());
                }
            }
            let x = Lu::new(jac, "direct torus covariance system")?.solve_vec(&rhs);
            let c0 = (0..nodes)
                .map(|j| symmetrize(&unvec(&x.as_slice()[j * nn..(j + 1) * nn], n, n)))
                .collect();
            (c0, unvec(&x.as_slice()[nodes * nn..], k, k), 0)
        }
    };
    let zero_level = (0..nodes)
        .map(|j| {
            let om = proj.adj.omega(j);
            max_abs(&(om.transpose() * &c0[j] * om))
        })
        .fold(0.0, f64::max);
    // The exact covariance satisfies `C = Q C Qᵀ`; the Fourier truncation of the boundary
    // coupling leaks a small tangential part into the direct solve, which is removed here
    // and reported relative to the largest node covariance.
    let scale = c0.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut leak = 0.0f64;
    let c0: Vec<DMatrix<f64>> = c0
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let q = proj.at(j, 0.0);
            let projected = symmetrize(&(&q * c * q.transpose()));
            leak = leak.max((c - &projected).norm() / scale);
            projected
        })
        .collect();
    Ok(TorusCovariance {
        method,
        a_norm: spectral_norm(&a),
        c0,
        a,
        iterations,
        zero_level,
        tangential_leak: leak,
        contraction_estimate: contraction,
        noise,
    })
}
