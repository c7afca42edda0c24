//! Euler–Maruyama integration of `dx = T f(t, x) dt + σ √T F(t, x) dW` in rescaled time,
//! with one reproducible noise stream per `(seed, trajectory)` pair.

#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::Problem;

/// Settings of one stochastic run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeRun {
    /// Noise intensity `σ`.
    pub sigma: f64,
    /// Step in rescaled time; one period is `1 / dt` steps.
    pub dt: f64,
    pub steps: u64,
    pub seed: u64,
    /// Every `thinning`-th state is passed to the observer.
    pub thinning: u64,
}

impl SdeRun {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", self.dt)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise intensity must be non-negative, got {}", self.sigma)));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidArgument("thinning must be at least 1".into()));
        }
        Ok(())
    }

    /// Steps covering `periods` periods.
    pub fn steps_for(periods: f64, dt: f64) -> u64 {
        (periods / dt).round() as u64
    }
}

/// Reduces a phase to `[0, 1)`.
pub fn wrap_phase(t: f64) -> f64 {
    let r = t - t.floor();
    if r >= 1.0 { 0.0 } else { r }
}

/// Deterministic Gaussian stream for trajectory `index` of an ensemble seeded by `seed`.
pub fn noise_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Integrates from `x0` at phase `t0`, passing `(step, phase, state)` to `observe` at step 0
/// and every `thinning` steps. Returns the final state.
pub fn euler_maruyama(
    problem: &Problem,
    period: f64,
    run: &SdeRun,
    x0: &[f64],
    t0: f64,
    trajectory: u64,
    observe: &mut dyn FnMut(u64, f64, &[f64]),
) -> Result<Vec<f64>> {
    run.validate()?;
    let n = problem.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { what: "initial state", expected: n, found: x0.len() });
    }
    let m = problem.noise_dim();
    let mut rng = noise_stream(run.seed, trajectory);
    let drift_scale = period * run.dt;
    let noise_scale = run.sigma * (period * run.dt).sqrt();
    let mut x = x0.to_vec();
    let params = problem.param_values().to_vec();
    let mut dw = vec![0.0; m];
    observe(0, wrap_phase(t0), &x);
    for k in 0..run.steps {
        let t = wrap_phase(t0 + k as f64 * run.dt);
        let f = problem.drift_raw(t, &x, &params);
        if run.sigma > 0.0 {
            let g = problem.diffusion_with(t, &x, &params);
            for w in dw.iter_mut() {
                *w = StandardNormal.sample(&mut rng);
            }
            for (i, xi) in x.iter_mut().enumerate() {
                let mut kick = 0.0;
                for (j, w) in dw.iter().enumerate() {
                    kick += g[(i, j)] * w;
                }
                *xi += f[i] * drift_scale + noise_scale * kick;
            }
        } else {
            for (xi, fi) in x.iter_mut().zip(&f) {
                *xi += fi * drift_scale;
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("stochastic trajectory"));
        }
        let step = k + 1;
        if step % run.thinning == 0 {
            observe(step, wrap_phase(t0 + step as f64 * run.dt), &x);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hopf;

    fn collect(run: &SdeRun, trajectory: u64) -> Vec<(u64, f64, Vec<f64>)> {
        let p = hopf().unwrap();
        let mut out = Vec::new();
        euler_maruyama(&p, 2.0 * core::f64::consts::PI, run, &[1.0, 0.0], 0.0, trajectory, &mut |k, t, x| {
            out.push((k, t, x.to_vec()))
        })
        .unwrap();
        out
    }

    #[test]
    fn zero_noise_is_explicit_euler() {
        let run = SdeRun { sigma: 0.0, dt: 1e-3, steps: 50, seed: 1, thinning: 1 };
        let path = collect(&run, 0);
        let p = hopf().unwrap();
        let mut x = vec![1.0, 0.0];
        for (k, _, got) in &path[1..] {
            let f = p.drift_raw(0.0, &x, p.param_values());
            let h = 2.0 * core::f64::consts::PI * 1e-3;
            x = vec![x[0] + f[0] * h, x[1] + f[1] * h];
            assert_eq!(&x, got, "step {k}");
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let run = SdeRun { sigma: 0.1, dt: 1e-3, steps: 200, seed: 42, thinning: 10 };
        assert_eq!(collect(&run, 3), collect(&run, 3));
        assert_ne!(collect(&run, 3), collect(&run, 4));
        assert_eq!(collect(&run, 0).len(), 21);
    }

    #[test]
    fn invalid_runs_are_rejected() {
        let run = SdeRun { sigma: -1.0, dt: 1e-3, steps: 1, seed: 0, thinning: 1 };
        assert!(run.validate().is_err());
        assert!(SdeRun { sigma: 0.1, dt: 0.0, ..run }.validate().is_err());
        assert!(SdeRun { sigma: 0.1, thinning: 0, ..run }.validate().is_err());
    }
}
