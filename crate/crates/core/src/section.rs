//! Transversal section coordinates `(ψ, τ)` of points near a cycle or torus, section samples
//! and crossing extraction along stochastic paths.
//!
//! A point `x` belongs to the hyperplane through `γ(ψ, τ)` annihilated by the adjoint
//! functions: `Λ(ψ, τ)ᵀ (x - γ(ψ, τ)) = 0`. For forced problems `τ` is the forcing phase and
//! only the angle (if any) is solved for.

#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::cycle::{AdjointCycle, CovarianceCycle, PeriodicOrbit};
use crate::error::{Error, Result};
use crate::fourier::FourierOps;
use crate::linalg::{Lu, sorted_symmetric_eigen};
use crate::sde::wrap_phase;
use crate::torus::{TorusCovariance, TorusProjection};
use crate::trajectory::Trajectory;

/// Section coordinates; `psi` is zero for cycles.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SectionCoords {
    pub psi: f64,
    pub tau: f64,
}

/// Newton tolerance on the hyperplane residual.
pub const SECTION_TOL: f64 = 1e-10;
/// Newton iteration cap.
pub const SECTION_MAX_ITER: usize = 20;

/// Geometry of an invariant object as seen by the section solver.
pub trait SectionGeometry: Send + Sync {
    fn dim(&self) -> usize;
    /// `τ` equals the forcing phase.
    fn phase_locked(&self) -> bool;
    /// The object carries an angle `ψ`.
    fn has_angle(&self) -> bool;
    /// `γ(ψ, τ)`.
    fn point(&self, c: SectionCoords) -> DVector<f64>;
    /// Columns of `Λ(ψ, τ)`.
    fn adjoints(&self, c: SectionCoords) -> DMatrix<f64>;
    /// `H = Λᵀ (x - γ)` and its Jacobian with respect to the free coordinates, ordered `(ψ, τ)`.
    fn hyperplane(&self, x: &DVector<f64>, c: SectionCoords) -> (DVector<f64>, DMatrix<f64>);
    /// Starting coordinates from the nearest stored point of the object.
    fn seed(&self, x: &DVector<f64>, phase: f64) -> SectionCoords;
    /// Predicted covariance `C(ψ, τ)` (without the factor `σ²`).
    fn covariance(&self, c: SectionCoords) -> DMatrix<f64>;
    /// Number of nonzero covariance eigenvalues, the codimension of the object.
    fn transversal_rank(&self) -> usize;
    /// Change of `ψ` when `τ` advances by one period: `γ(ψ, τ + 1) = γ(ψ + shift, τ)`.
    fn angle_shift(&self) -> f64 {
        0.0
    }
}

/// Equivalent coordinates with `τ ∈ [0, 1)` and `ψ ∈ [0, 1)`.
pub fn normalize_coords(geom: &dyn SectionGeometry, c: SectionCoords) -> SectionCoords {
    let mut k = c.tau.floor();
    let mut tau = c.tau - k;
    if tau >= 1.0 {
        tau -= 1.0;
        k += 1.0;
    }
    SectionCoords { psi: wrap_phase(c.psi + k * geom.angle_shift()), tau }
}

/// Equivalent coordinates whose `τ` lies within half a period of `reference.tau`, so that
/// both can be interpolated linearly.
pub fn unwrap_near(geom: &dyn SectionGeometry, c: SectionCoords, reference: SectionCoords) -> SectionCoords {
    let k = (reference.tau - c.tau + 0.5).floor();
    let psi = c.psi - k * geom.angle_shift();
    SectionCoords { psi: reference.psi + signed_gap(psi - reference.psi), tau: c.tau + k }
}

fn free_count(geom: &dyn SectionGeometry) -> usize {
    usize::from(geom.has_angle()) + usize::from(!geom.phase_locked())
}

fn signed_gap(d: f64) -> f64 {
    let w = wrap_phase(d);
    if w >= 0.5 { w - 1.0 } else { w }
}

/// Solves `Λᵀ (x - γ) = 0` for the free coordinates, starting from `guess` or the nearest
/// stored point. `phase` is the forcing phase (ignored for autonomous objects).
pub fn locate_section_coords(
    geom: &dyn SectionGeometry,
    x: &DVector<f64>,
    phase: f64,
    guess: Option<SectionCoords>,
) -> Result<SectionCoords> {
    let mut c = guess.unwrap_or_else(|| geom.seed(x, phase));
    if geom.phase_locked() {
        c.tau += signed_gap(phase - c.tau);
    }
    c = normalize_coords(geom, c);
    if free_count(geom) == 0 {
        return Ok(c);
    }
    let mut last = f64::INFINITY;
    for _ in 0..=SECTION_MAX_ITER {
        let (h, jac) = geom.hyperplane(x, c);
        last = h.amax();
        if last < SECTION_TOL {
            return Ok(c);
        }
        if !last.is_finite() {
            break;
        }
        let step = Lu::new(jac, "section coordinates")?.solve_vec(&(-h));
        let mut i = 0;
        if geom.has_angle() {
            c.psi += step[i].clamp(-0.25, 0.25);
            i += 1;
        }
        if !geom.phase_locked() {
            c.tau += step[i].clamp(-0.25, 0.25);
        }
        c = normalize_coords(geom, c);
    }
    Err(Error::NewtonDivergence(format!("section coordinates, residual {last:e}")))
}

/// One point assigned to its section, with its deviation projected on the predicted
/// covariance eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionSample {
    pub trajectory: u64,
    pub step: u64,
    pub x: Vec<f64>,
    pub coords: SectionCoords,
    /// `x - γ(ψ, τ)`.
    pub x_tr: Vec<f64>,
    /// Coefficients of `x_tr` on the leading eigenvectors of `C(ψ, τ)`.
    pub projections: Vec<f64>,
    /// `σ²` times the matching eigenvalues.
    pub predicted_var: Vec<f64>,
    /// `max |Λᵀ x_tr|`.
    pub residual: f64,
}

/// Builds the sample for `x` at known coordinates.
pub fn section_sample(
    geom: &dyn SectionGeometry,
    sigma: f64,
    x: &DVector<f64>,
    coords: SectionCoords,
    trajectory: u64,
    step: u64,
) -> SectionSample {
    let x_tr = x - geom.point(coords);
    let residual = (geom.adjoints(coords).transpose() * &x_tr).amax();
    let (vals, vecs) = sorted_symmetric_eigen(&geom.covariance(coords));
    let rank = geom.transversal_rank();
    SectionSample {
        trajectory,
        step,
        x: x.as_slice().to_vec(),
        coords,
        projections: (0..rank).map(|i| vecs.column(i).dot(&x_tr)).collect(),
        predicted_var: (0..rank).map(|i| sigma * sigma * vals[i].max(0.0)).collect(),
        x_tr: x_tr.as_slice().to_vec(),
        residual,
    }
}

/// How samples are taken from a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingMode {
    /// Every observed point is assigned to its own section.
    EveryPoint,
    /// Linearly interpolated crossings of the section `τ = τ*`.
    Crossings { tau_star: f64 },
}

/// Settings shared by the samplers of one ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerSettings {
    pub mode: SamplingMode,
    /// Noise intensity, used to scale predicted variances.
    pub sigma: f64,
    /// Phase advance per integration step.
    pub dt: f64,
    /// Steps between observed points.
    pub stride: u64,
    /// Samples taken before this step are discarded.
    pub skip_before: u64,
}

impl SamplerSettings {
    /// Half-width of the `τ` window around `τ*` in which every observed point is located.
    pub fn window(&self) -> f64 {
        (4.0 * self.dt * self.stride as f64).max(2e-3)
    }

    /// Phase span after which `τ` is re-located away from the window.
    pub fn track(&self) -> f64 {
        0.01f64.max(2.0 * self.dt * self.stride as f64)
    }
}

/// Path observer producing section samples; feed it the points of one trajectory in order.
///
/// In crossing mode, points far from `τ*` are only located every `track` units of phase to
/// keep the predicted `τ` accurate; points inside the window are all located and consecutive
/// pairs straddling `τ*` yield one interpolated sample.
pub struct SectionSampler<'a> {
    geom: &'a dyn SectionGeometry,
    settings: SamplerSettings,
    trajectory: u64,
    last: Option<(u64, f64, SectionCoords, DVector<f64>)>,
    anchor: Option<(u64, SectionCoords)>,
    pub samples: Vec<SectionSample>,
    /// Points whose coordinates could not be located.
    pub failures: usize,
}

impl<'a> SectionSampler<'a> {
    pub fn new(geom: &'a dyn SectionGeometry, settings: SamplerSettings, trajectory: u64) -> Self {
        Self { geom, settings, trajectory, last: None, anchor: None, samples: Vec::new(), failures: 0 }
    }

    fn locate(&mut self, x: &DVector<f64>, phase: f64, guess: Option<SectionCoords>) -> Option<SectionCoords> {
        let found = locate_section_coords(self.geom, x, phase, guess)
            .or_else(|_| locate_section_coords(self.geom, x, phase, None));
        match found {
            Ok(c) => Some(c),
            Err(_) => {
                self.failures += 1;
                None
            }
        }
    }

    fn push(&mut self, x: &DVector<f64>, c: SectionCoords, step: u64) {
        if step >= self.settings.skip_before {
            self.samples.push(section_sample(self.geom, self.settings.sigma, x, c, self.trajectory, step));
        }
    }

    fn predicted(&self, step: u64) -> Option<SectionCoords> {
        self.anchor
            .map(|(s, c)| SectionCoords { psi: c.psi, tau: c.tau + (step - s) as f64 * self.settings.dt })
    }

    /// Processes the path point `x` at `step` with forcing phase `phase`.
    pub fn observe(&mut self, step: u64, phase: f64, x: &[f64]) {
        let x = DVector::from_column_slice(x);
        match self.settings.mode {
            SamplingMode::EveryPoint => {
                let guess = self.predicted(step);
                if let Some(c) = self.locate(&x, phase, guess) {
                    self.push(&x, c, step);
                    self.anchor = Some((step, c));
                }
            }
            SamplingMode::Crossings { tau_star } => self.observe_crossing(step, phase, x, tau_star),
        }
    }

    fn observe_crossing(&mut self, step: u64, phase: f64, x: DVector<f64>, tau_star: f64) {
        let predicted = self.predicted(step);
        let near = predicted.is_none_or(|p| signed_gap(tau_star - p.tau).abs() < self.settings.window());
        let due = self.anchor.is_none_or(|(s, _)| (step - s) as f64 * self.settings.dt >= self.settings.track());
        if !near && !due {
            self.last = None;
            return;
        }
        let Some(c) = self.locate(&x, phase, predicted) else {
            self.last = None;
            return;
        };
        self.anchor = Some((step, c));
        if let Some((s_a, phase_a, c_a, x_a)) = self.last.take() {
            let c_b = unwrap_near(self.geom, c, c_a);
            let delta = c_b.tau - c_a.tau;
            let reach = signed_gap(tau_star - c_a.tau);
            if step - s_a == self.settings.stride && delta > 0.0 && reach > 0.0 && reach <= delta {
                let s = reach / delta;
                let xi = &x_a + (&x - &x_a) * s;
                let guess = SectionCoords { psi: c_a.psi + s * (c_b.psi - c_a.psi), tau: c_a.tau + reach };
                let phase_i = phase_a + s * signed_gap(phase - phase_a);
                if let Some(ci) = self.locate(&xi, phase_i, Some(guess)) {
                    let at = if s < 1.0 { s_a } else { step };
                    self.push(&xi, ci, at);
                }
            }
        }
        self.last = Some((step, phase, c, x));
    }
}

/// Section geometry of a periodic orbit.
#[derive(Debug, Clone)]
pub struct CycleGeometry {
    gamma: Trajectory,
    lambda: Option<Trajectory>,
    covariance: CovarianceCycle,
    dim: usize,
}

impl CycleGeometry {
    pub fn new(orbit: &PeriodicOrbit, adjoint: &AdjointCycle, covariance: &CovarianceCycle) -> Self {
        Self {
            gamma: orbit.orbit().clone(),
            lambda: adjoint.trajectory().cloned(),
            covariance: covariance.clone(),
            dim: orbit.problem().dim(),
        }
    }
}

impl SectionGeometry for CycleGeometry {
    fn dim(&self) -> usize {
        self.dim
    }

    fn phase_locked(&self) -> bool {
        self.lambda.is_none()
    }

    fn has_angle(&self) -> bool {
        false
    }

    fn point(&self, c: SectionCoords) -> DVector<f64> {
        self.gamma.eval(wrap_phase(c.tau))
    }

    fn adjoints(&self, c: SectionCoords) -> DMatrix<f64> {
        match &self.lambda {
            Some(l) => DMatrix::from_columns(&[l.eval(wrap_phase(c.tau))]),
            None => DMatrix::zeros(self.dim, 0),
        }
    }

    fn hyperplane(&self, x: &DVector<f64>, c: SectionCoords) -> (DVector<f64>, DMatrix<f64>) {
        let Some(l) = &self.lambda else {
            return (DVector::zeros(0), DMatrix::zeros(0, 0));
        };
        let t = wrap_phase(c.tau);
        let dev = x - self.gamma.eval(t);
        let lam = l.eval(t);
        let h = lam.dot(&dev);
        let dh = l.deriv(t).dot(&dev) - lam.dot(&self.gamma.deriv(t));
        (DVector::from_element(1, h), DMatrix::from_element(1, 1, dh))
    }

    fn seed(&self, x: &DVector<f64>, phase: f64) -> SectionCoords {
        if self.phase_locked() {
            return SectionCoords { psi: 0.0, tau: wrap_phase(phase) };
        }
        let samples = 256;
        let best = (0..samples)
            .map(|k| {
                let t = k as f64 / samples as f64;
                (t, (x - self.gamma.eval(t)).norm_squared())
            })
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        SectionCoords { psi: 0.0, tau: best.0 }
    }

    fn covariance(&self, c: SectionCoords) -> DMatrix<f64> {
        self.covariance.at(wrap_phase(c.tau))
    }

    fn transversal_rank(&self) -> usize {
        self.dim - usize::from(self.lambda.is_some())
    }
}

/// Section geometry of a torus, with predicted covariances tabulated on a grid of `τ` levels.
#[derive(Debug, Clone)]
pub struct TorusGeometry {
    proj: TorusProjection,
    ops: FourierOps,
    levels: usize,
    /// `table[l][j] = C(φ_j, l / levels)`.
    table: Vec<Vec<DMatrix<f64>>>,
}

impl TorusGeometry {
    /// Tabulates `C` at `levels + 1` equally spaced `τ` values; `C` is linearly interpolated in
    /// between, so `levels` should match the fine mesh when `C` varies quickly along the flow.
    pub fn new(proj: &TorusProjection, cov: &TorusCovariance, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidArgument("at least one covariance level is required".into()));
        }
        let sol = proj.solution();
        let steps = sol.rk_steps();
        let table = (0..=levels)
            .map(|l| {
                let k = (l * steps + levels / 2) / levels;
                (0..sol.node_count()).map(|j| cov.node_at(proj, j, k)).collect()
            })
            .collect();
        Ok(Self { proj: proj.clone(), ops: sol.ops().clone(), levels, table })
    }

    fn nodes(&self) -> usize {
        self.ops.size()
    }
}

impl SectionGeometry for TorusGeometry {
    fn dim(&self) -> usize {
        self.proj.solution().dim()
    }

    fn phase_locked(&self) -> bool {
        !self.proj.solution().problem().is_autonomous()
    }

    fn has_angle(&self) -> bool {
        true
    }

    fn point(&self, c: SectionCoords) -> DVector<f64> {
        let c = normalize_coords(self, c);
        self.proj.solution().gamma_at(c.psi, c.tau)
    }

    fn adjoints(&self, c: SectionCoords) -> DMatrix<f64> {
        let c = normalize_coords(self, c);
        let w = self.ops.interpolation_weights(c.psi);
        let t = c.tau;
        let adj = self.proj.adjoints();
        let mut out = adj.lambda(0, t) * w[0];
        for j in 1..self.nodes() {
            out += adj.lambda(j, t) * w[j];
        }
        out
    }

    fn hyperplane(&self, x: &DVector<f64>, c: SectionCoords) -> (DVector<f64>, DMatrix<f64>) {
        let c = normalize_coords(self, c);
        let sol = self.proj.solution();
        let adj = self.proj.adjoints();
        let n = sol.dim();
        let k = sol.tangent_count();
        let t = c.tau;
        let w = self.ops.interpolation_weights(c.psi);
        let dw = self.ops.derivative_weights(c.psi);
        let mut g = DVector::zeros(n);
        let mut g_psi = DVector::zeros(n);
        let mut g_tau = DVector::zeros(n);
        let mut lam = DMatrix::zeros(n, k);
        let mut lam_psi = DMatrix::zeros(n, k);
        let mut lam_tau = DMatrix::zeros(n, k);
        for j in 0..self.nodes() {
            let state = sol.flows()[j].state();
            let gj = state.eval(t);
            g.axpy(w[j], &gj, 1.0);
            g_psi.axpy(dw[j], &gj, 1.0);
            g_tau.axpy(w[j], &state.deriv(t), 1.0);
            let lj = adj.lambda(j, t);
            lam += &lj * w[j];
            lam_psi += &lj * dw[j];
            let mut dl = DMatrix::zeros(n, k);
            if let Some(d) = adj.lambda_t_deriv(j, t) {
                dl.set_column(0, &d);
            }
            dl.set_column(k - 1, &adj.lambda_phi_deriv(j, t));
            lam_tau += dl * w[j];
        }
        let dev = x - &g;
        let h = lam.transpose() * &dev;
        let free = free_count(self);
        let mut jac = DMatrix::zeros(k, free);
        jac.set_column(0, &(lam_psi.transpose() * &dev - lam.transpose() * &g_psi));
        if free == 2 {
            jac.set_column(1, &(lam_tau.transpose() * &dev - lam.transpose() * &g_tau));
        }
        (h, jac)
    }

    fn seed(&self, x: &DVector<f64>, phase: f64) -> SectionCoords {
        let sol = self.proj.solution();
        let taus: Vec<f64> = if self.phase_locked() {
            alloc::vec![wrap_phase(phase)]
        } else {
            (0..64).map(|k| k as f64 / 64.0).collect()
        };
        let mut best = (SectionCoords::default(), f64::INFINITY);
        for j in 0..self.nodes() {
            for &t in &taus {
                let d = (x - sol.gamma(j, t)).norm_squared();
                if d < best.1 {
                    best = (SectionCoords { psi: self.ops.nodes()[j], tau: t }, d);
                }
            }
        }
        best.0
    }

    fn covariance(&self, c: SectionCoords) -> DMatrix<f64> {
        let c = normalize_coords(self, c);
        let pos = c.tau * self.levels as f64;
        let l = (pos.floor() as usize).min(self.levels - 1);
        let frac = pos - l as f64;
        let w = self.ops.interpolation_weights(c.psi);
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..self.nodes() {
            out += (&self.table[l][j] * (1.0 - frac) + &self.table[l + 1][j] * frac) * w[j];
        }
        out
    }

    fn transversal_rank(&self) -> usize {
        let sol = self.proj.solution();
        sol.dim() - sol.tangent_count()
    }

    fn angle_shift(&self) -> f64 {
        self.proj.solution().rho()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::*;
    use crate::model::hopf;
    use crate::sde::{SdeRun, euler_maruyama};
    use alloc::vec;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn hopf_geometry() -> (CycleGeometry, PeriodicOrbit) {
        let p = hopf().unwrap();
        let circle = |t: f64| DVector::from_vec(vec![(2.0 * PI * t).cos(), (2.0 * PI * t).sin()]);
        let orbit = solve_periodic_orbit(&p, &circle, 2.0 * PI, None, &CycleSettings::default()).unwrap();
        let w = adjoint_left_vector(&orbit).unwrap();
        let adjoint = adjoint_function(&orbit, Some(&w)).unwrap();
        let proj = projection_family(&orbit, &adjoint);
        let noise = noise_quadrature(&orbit).unwrap();
        let c0 = covariance_series(&orbit, &proj, &noise).unwrap().c0;
        let cov = propagate_covariance(&orbit, &proj, &noise, &c0).unwrap();
        (CycleGeometry::new(&orbit, &adjoint, &cov), orbit)
    }

    #[test]
    fn hopf_radial_offsets_keep_their_phase() {
        let (geom, _) = hopf_geometry();
        for (tau, r) in [(0.1, 1.05), (0.62, 0.93), (0.999, 1.2)] {
            let angle = 2.0 * PI * tau;
            let x = DVector::from_vec(vec![r * angle.cos(), r * angle.sin()]);
            let c = locate_section_coords(&geom, &x, 0.0, None).unwrap();
            assert!(signed_gap(c.tau - tau).abs() < 1e-8, "{tau} -> {}", c.tau);
            let s = section_sample(&geom, 0.1, &x, c, 0, 0);
            assert!(s.residual < 1e-8);
            assert_eq!(s.projections.len(), 1);
            assert!((s.projections[0].abs() - (r - 1.0).abs()).abs() < 1e-8);
            assert!((s.predicted_var[0] - 0.01 * crate::oracles::hopf::eigenvalue(tau)).abs() < 1e-9);
        }
    }

    fn crossings(geom: &CycleGeometry, orbit: &PeriodicOrbit, steps: u64, tau_star: f64) -> Vec<SectionSample> {
        let run = SdeRun { sigma: 0.0, dt: 1e-3, steps, seed: 0, thinning: 1 };
        let settings = SamplerSettings {
            mode: SamplingMode::Crossings { tau_star },
            sigma: 0.0,
            dt: run.dt,
            stride: 1,
            skip_before: 0,
        };
        let mut sampler = SectionSampler::new(geom, settings, 0);
        let x0 = orbit.gamma(0.0);
        euler_maruyama(orbit.problem(), orbit.period(), &run, x0.as_slice(), 0.0, 0, &mut |k, t, x| {
            sampler.observe(k, t, x)
        })
        .unwrap();
        assert_eq!(sampler.failures, 0);
        sampler.samples
    }

    #[test]
    fn deterministic_path_crosses_once_per_period() {
        let (geom, orbit) = hopf_geometry();
        let samples = crossings(&geom, &orbit, 3000, 0.5);
        assert_eq!(samples.len(), 3);
        for s in &samples {
            assert!((s.coords.tau - 0.5).abs() < 1e-9);
            assert!(s.residual < 1e-8);
        }
        assert_eq!(crossings(&geom, &orbit, 1000, 0.5).len(), 1);
        // Explicit Euler drifts off the orbit by O(dt) per period, nothing more.
        for s in crossings(&geom, &orbit, 2500, 0.0) {
            assert!(signed_gap(s.coords.tau).abs() < 1e-9);
            assert!((DVector::from_vec(s.x.clone()) - orbit.gamma(0.0)).norm() < 1e-2);
        }
    }

    proptest! {
        #[test]
        fn located_points_lie_on_their_hyperplane(tau in 0.0f64..1.0, r in 0.8f64..1.2) {
            let (geom, _) = HOPF.with(|g| g.clone());
            let angle = 2.0 * PI * tau;
            let x = DVector::from_vec(vec![r * angle.cos(), r * angle.sin()]);
            let c = locate_section_coords(&geom, &x, 0.0, None).unwrap();
            prop_assert!((0.0..1.0).contains(&c.tau));
            let s = section_sample(&geom, 0.1, &x, c, 0, 0);
            prop_assert!(s.residual < 1e-8);
        }
    }

    /// Flat torus `γ(ψ, τ) = (ψ + ρτ, τ)` with only the shift structure used.
    struct Shifted(f64);

    impl SectionGeometry for Shifted {
        fn dim(&self) -> usize {
            2
        }
        fn phase_locked(&self) -> bool {
            false
        }
        fn has_angle(&self) -> bool {
            true
        }
        fn point(&self, c: SectionCoords) -> DVector<f64> {
            DVector::from_vec(vec![c.psi + self.0 * c.tau, c.tau])
        }
        fn adjoints(&self, _c: SectionCoords) -> DMatrix<f64> {
            DMatrix::identity(2, 2)
        }
        fn hyperplane(&self, _x: &DVector<f64>, _c: SectionCoords) -> (DVector<f64>, DMatrix<f64>) {
            (DVector::zeros(2), DMatrix::identity(2, 2))
        }
        fn seed(&self, _x: &DVector<f64>, _phase: f64) -> SectionCoords {
            SectionCoords::default()
        }
        fn covariance(&self, _c: SectionCoords) -> DMatrix<f64> {
            DMatrix::zeros(2, 2)
        }
        fn transversal_rank(&self) -> usize {
            0
        }
        fn angle_shift(&self) -> f64 {
            self.0
        }
    }

    proptest! {
        #[test]
        fn whole_periods_shift_the_angle(psi in 0.0f64..1.0, tau in 0.0f64..1.0, k in -3i32..4, rho in 0.0f64..2.0) {
            let g = Shifted(rho);
            let c = normalize_coords(&g, SectionCoords { psi, tau: tau + k as f64 });
            prop_assert!((0.0..1.0).contains(&c.tau) && (0.0..1.0).contains(&c.psi));
            prop_assert!(signed_gap(c.tau - tau).abs() < 1e-12);
            prop_assert!(signed_gap(c.psi - (psi + k as f64 * rho)).abs() < 1e-9);
            let back = unwrap_near(&g, c, SectionCoords { psi, tau: tau + k as f64 });
            prop_assert!((back.tau - tau - k as f64).abs() < 1e-9);
            prop_assert!(signed_gap(back.psi - psi).abs() < 1e-9);
        }
    }

    std::thread_local! {
        static HOPF: (CycleGeometry, PeriodicOrbit) = hopf_geometry();
    }
}
