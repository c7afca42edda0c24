//! Parallel Monte-Carlo ensembles: independent trajectories with their own noise streams,
//! merged in trajectory order so results do not depend on the number of threads.

use rayon::prelude::*;

use noisetube_core::model::Problem;
use noisetube_core::sde::{SdeRun, euler_maruyama};
use noisetube_core::section::{SamplerSettings, SamplingMode, SectionGeometry, SectionSample, SectionSampler};

use crate::error::{CliError, CliResult};

/// Shape of one ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub sigma: f64,
    pub dt: f64,
    pub seed: u64,
    pub thinning: u64,
    pub trajectories: u64,
    /// Sampled periods summed over all trajectories.
    pub periods: f64,
    /// Periods integrated and discarded at the start of every trajectory.
    pub burn_in: f64,
    pub mode: SamplingMode,
}

impl EnsembleSpec {
    /// Sampled steps of one trajectory, rounded up to a whole number of observed points.
    pub fn sampled_steps(&self) -> u64 {
        let per = SdeRun::steps_for(self.periods / self.trajectories as f64, self.dt);
        per.div_ceil(self.thinning) * self.thinning
    }

    pub fn burn_in_steps(&self) -> u64 {
        SdeRun::steps_for(self.burn_in, self.dt).div_ceil(self.thinning) * self.thinning
    }
}

/// Merged samples of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutput {
    pub samples: Vec<SectionSample>,
    /// Points whose section coordinates could not be located.
    pub failures: usize,
}

/// Integrates every trajectory from `start(index)` (state and initial phase) and samples it.
///
/// Runs on the current rayon pool; `threads` of 0 keeps the global pool.
pub fn run_ensemble(
    problem: &Problem,
    period: f64,
    geometry: &dyn SectionGeometry,
    start: &(dyn Fn(u64) -> (Vec<f64>, f64) + Sync),
    spec: &EnsembleSpec,
    threads: usize,
) -> CliResult<EnsembleOutput> {
    if spec.trajectories == 0 {
        return Err(CliError::config("an ensemble needs at least one trajectory"));
    }
    let burn = spec.burn_in_steps();
    let settings = SamplerSettings {
        mode: spec.mode,
        sigma: spec.sigma,
        dt: spec.dt,
        stride: spec.thinning,
        skip_before: burn,
    };
    let one = |index: u64| -> CliResult<(Vec<SectionSample>, usize)> {
        let run = SdeRun {
            sigma: spec.sigma,
            dt: spec.dt,
            steps: burn + spec.sampled_steps(),
            seed: spec.seed,
            thinning: spec.thinning,
        };
        let (x0, t0) = start(index);
        let mut sampler = SectionSampler::new(geometry, settings, index);
        euler_maruyama(problem, period, &run, &x0, t0, index, &mut |k, t, x| sampler.observe(k, t, x))?;
        Ok((sampler.samples, sampler.failures))
    };
    let run_all = || (0..spec.trajectories).into_par_iter().map(one).collect::<Vec<_>>();
    let parts = if threads == 0 {
        run_all()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::config(format!("cannot start {threads} threads: {e}")))?
            .install(run_all)
    };
    let mut out = EnsembleOutput { samples: Vec::new(), failures: 0 };
    for part in parts {
        let (samples, failures) = part?;
        out.samples.extend(samples);
        out.failures += failures;
    }
    Ok(out)
}
