//! Run configuration: a TOML file whose every key is optional, overridden by command-line
//! flags, on top of per-problem defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Partial configuration as read from a file or assembled from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: Option<String>,
    /// Overrides of the problem's parameter values.
    pub params: BTreeMap<String, f64>,
    pub solver: SolverSection,
    pub covariance: CovarianceSection,
    pub sde: SdeSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub mesh_intervals: Option<usize>,
    pub degree: Option<usize>,
    /// Fourier modes `N` of a torus.
    #[serde(rename = "N")]
    pub modes: Option<usize>,
    pub rk_steps: Option<usize>,
    pub tol: Option<f64>,
    #[serde(rename = "K_max")]
    pub max_newton: Option<usize>,
    /// Rotation number of a torus.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovarianceSection {
    /// `series` or `kronecker` for cycles, `fixed_point` or `direct` for tori.
    pub method: Option<String>,
    /// Value imposed on the neutral directions; only 0 is meaningful.
    pub level: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdeSection {
    pub sigma: Option<f64>,
    pub dt: Option<f64>,
    /// Sampled periods summed over the ensemble.
    pub periods: Option<f64>,
    pub trajectories: Option<u64>,
    /// Periods discarded at the start of every trajectory.
    pub burn_in: Option<f64>,
    pub seed: Option<u64>,
    pub thinning: Option<u64>,
    pub bins: Option<usize>,
    /// `psi` or `tau`.
    pub bin_by: Option<String>,
    /// `points` or `crossings`.
    pub sampling: Option<String>,
    pub tau_star: Option<f64>,
    /// Accepted range of empirical over predicted std.
    pub band: Option<[f64; 2]>,
    /// Bins with fewer samples are left out of the comparison.
    pub min_count: Option<usize>,
    /// Worker threads; 0 uses every available core.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: Option<PathBuf>,
    /// Directory holding a previously written `torus.json`.
    pub geometry: Option<PathBuf>,
}

macro_rules! take {
    ($dst:expr, $src:expr, $($field:ident),+) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )+
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::ConfigFile { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    /// Fields set in `other` replace those of `self`.
    pub fn merge(mut self, other: &RunConfig) -> Self {
        take!(self, other, problem);
        for (k, v) in &other.params {
            self.params.insert(k.clone(), *v);
        }
        take!(self.solver, other.solver, mesh_intervals, degree, modes, rk_steps, tol, max_newton, rho);
        take!(self.covariance, other.covariance, method, level);
        take!(
            self.sde, other.sde, sigma, dt, periods, trajectories, burn_in, seed, thinning, bins, bin_by, sampling,
            tau_star, band, min_count, threads
        );
        take!(self.output, other.output, directory, geometry);
        self
    }

    /// Fills every unset value from the defaults of the selected problem and validates.
    pub fn resolve(&self) -> CliResult<Resolved> {
        let problem = self.problem.clone().ok_or_else(|| CliError::config("no problem selected"))?;
        let d = Defaults::of(&problem)?;
        let method = match self.covariance.method.as_deref() {
            None => d.method,
            Some(m) => CovarianceMethod::parse(m)?,
        };
        if method.is_torus() != d.torus {
            return Err(CliError::config(format!("covariance method {} does not apply to {problem}", method.name())));
        }
        let level = self.covariance.level.unwrap_or(0.0);
        if level != 0.0 {
            return Err(CliError::config("only the zero neutral level is supported"));
        }
        let sampling = match self.sde.sampling.as_deref().unwrap_or(d.sampling) {
            "points" => Sampling::Points,
            "crossings" => Sampling::Crossings,
            other => return Err(CliError::config(format!("sampling must be points or crossings, got {other}"))),
        };
        let bin_by = match self.sde.bin_by.as_deref().unwrap_or(d.bin_by) {
            "psi" => BinAxis::Psi,
            "tau" => BinAxis::Tau,
            other => return Err(CliError::config(format!("bin_by must be psi or tau, got {other}"))),
        };
        let r = Resolved {
            problem,
            torus: d.torus,
            params: self.params.clone(),
            mesh_intervals: self.solver.mesh_intervals.unwrap_or(d.intervals),
            degree: self.solver.degree.unwrap_or(d.degree),
            modes: self.solver.modes.unwrap_or(d.modes),
            rk_steps: self.solver.rk_steps.unwrap_or(4000),
            tol: self.solver.tol.unwrap_or(1e-10),
            max_newton: self.solver.max_newton.unwrap_or(20),
            rho: self.solver.rho,
            method,
            sigma: self.sde.sigma.unwrap_or(0.1),
            dt: self.sde.dt.unwrap_or(1e-4),
            periods: self.sde.periods.unwrap_or(d.periods),
            trajectories: self.sde.trajectories.unwrap_or(d.trajectories),
            burn_in: self.sde.burn_in.unwrap_or(2.0),
            seed: self.sde.seed.unwrap_or(1),
            thinning: self.sde.thinning.unwrap_or(d.thinning),
            bins: self.sde.bins.unwrap_or(d.bins),
            bin_by,
            sampling,
            tau_star: self.sde.tau_star.unwrap_or(d.tau_star),
            band: self.sde.band.unwrap_or(d.band),
            min_count: self.sde.min_count.unwrap_or(d.min_count),
            threads: self.sde.threads.unwrap_or(0),
            directory: self.output.directory.clone().unwrap_or_else(|| PathBuf::from("out")),
            geometry: self.output.geometry.clone(),
        };
        r.validate()?;
        Ok(r)
    }
}

/// Covariance method, fixed by the kind of invariant object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMethod {
    Series,
    Kronecker,
    FixedPoint,
    Direct,
}

impl CovarianceMethod {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "series" => Ok(Self::Series),
            "kronecker" => Ok(Self::Kronecker),
            "fixed_point" => Ok(Self::FixedPoint),
            "direct" => Ok(Self::Direct),
            other => Err(CliError::config(format!(
                "covariance method must be series, kronecker, fixed_point or direct, got {other}"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Series => "series",
            Self::Kronecker => "kronecker",
            Self::FixedPoint => "fixed_point",
            Self::Direct => "direct",
        }
    }

    pub fn is_torus(self) -> bool {
        matches!(self, Self::FixedPoint | Self::Direct)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Every thinned point on its own section.
    Points,
    /// Interpolated crossings of `τ = τ*`.
    Crossings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinAxis {
    Psi,
    Tau,
}

/// A complete, validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub problem: String,
    pub torus: bool,
    pub params: BTreeMap<String, f64>,
    pub mesh_intervals: usize,
    pub degree: usize,
    pub modes: usize,
    pub rk_steps: usize,
    pub tol: f64,
    pub max_newton: usize,
    pub rho: Option<f64>,
    pub method: CovarianceMethod,
    pub sigma: f64,
    pub dt: f64,
    pub periods: f64,
    pub trajectories: u64,
    pub burn_in: f64,
    pub seed: u64,
    pub thinning: u64,
    pub bins: usize,
    pub bin_by: BinAxis,
    pub sampling: Sampling,
    pub tau_star: f64,
    pub band: [f64; 2],
    pub min_count: usize,
    pub threads: usize,
    pub directory: PathBuf,
    pub geometry: Option<PathBuf>,
}

impl Resolved {
    fn validate(&self) -> CliResult<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() { Ok(()) } else { Err(CliError::config(format!("{name} must be positive, got {v}"))) }
        };
        let nonzero = |name: &str, v: usize| {
            if v > 0 { Ok(()) } else { Err(CliError::config(format!("{name} must be at least 1"))) }
        };
        nonzero("mesh_intervals", self.mesh_intervals)?;
        nonzero("degree", self.degree)?;
        nonzero("N", self.modes)?;
        nonzero("rk_steps", self.rk_steps)?;
        nonzero("K_max", self.max_newton)?;
        nonzero("bins", self.bins)?;
        nonzero("trajectories", self.trajectories as usize)?;
        nonzero("thinning", self.thinning as usize)?;
        positive("tol", self.tol)?;
        positive("dt", self.dt)?;
        positive("periods", self.periods)?;
        if let Some(rho) = self.rho {
            positive("rho", rho)?;
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(CliError::config(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(CliError::config("burn_in must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.tau_star) {
            return Err(CliError::config("tau_star must lie in [0, 1)"));
        }
        if !(self.band[0] > 0.0 && self.band[0] < self.band[1]) {
            return Err(CliError::config("band must be an increasing pair of positive numbers"));
        }
        if self.bin_by == BinAxis::Psi && !self.torus {
            return Err(CliError::config("cycles have no angle to bin by; use bin_by = \"tau\""));
        }
        Ok(())
    }
}

/// Settings reproducing the reference experiments of each built-in problem.
struct Defaults {
    torus: bool,
    intervals: usize,
    degree: usize,
    modes: usize,
    method: CovarianceMethod,
    periods: f64,
    trajectories: u64,
    thinning: u64,
    bins: usize,
    bin_by: &'static str,
    sampling: &'static str,
    tau_star: f64,
    band: [f64; 2],
    min_count: usize,
}

impl Defaults {
    fn of(problem: &str) -> CliResult<Self> {
        let cycle = Defaults {
            torus: false,
            intervals: 20,
            degree: 4,
            modes: 1,
            method: CovarianceMethod::Series,
            periods: 500.0,
            trajectories: 4,
            thinning: 10,
            bins: 40,
            bin_by: "tau",
            sampling: "points",
            tau_star: 0.0,
            band: [0.85, 1.15],
            min_count: 200,
        };
        match problem {
            "hopf" => Ok(cycle),
            "linosc" => Ok(Defaults { periods: 1000.0, thinning: 1, bins: 1, sampling: "crossings", tau_star: 0.1, ..cycle }),
            "qp_radial" => Ok(Defaults {
                torus: true,
                intervals: 60,
                degree: 5,
                modes: 4,
                method: CovarianceMethod::Direct,
                periods: 10_000.0,
                trajectories: 8,
                thinning: 1,
                bins: 40,
                bin_by: "psi",
                sampling: "crossings",
                tau_star: 0.0,
                band: [0.85, 1.15],
                min_count: 100,
            }),
            "vdp_coupled" => Ok(Defaults {
                torus: true,
                intervals: 20,
                degree: 4,
                modes: 14,
                method: CovarianceMethod::Direct,
                periods: 5_800.0,
                trajectories: 8,
                thinning: 1,
                bins: 29,
                bin_by: "psi",
                sampling: "crossings",
                tau_star: 0.5,
                band: [0.8, 1.2],
                min_count: 100,
            }),
            other => Err(CliError::config(format!(
                "unknown problem {other}; expected one of {}",
                noisetube_core::model::BUILTIN_NAMES.join(", ")
            ))),
        }
    }
}
