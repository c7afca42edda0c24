use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use noisetube::commands::{cmd_compare, cmd_cycle, cmd_simulate, cmd_torus};
use noisetube::config::RunConfig;
use noisetube::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "noisetube", version, about = "Noise-induced covariance around limit cycles and invariant tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Periodic orbit, adjoint, projections and covariance of a limit cycle.
    Cycle(Common),
    /// Invariant torus, adjoints and node covariances.
    Torus(Common),
    /// Euler-Maruyama ensemble compared against the predicted covariance.
    Simulate(Common),
    /// Re-bins the samples of an earlier simulation.
    Compare {
        #[command(flatten)]
        common: Common,
        /// samples.csv written by `simulate`.
        #[arg(long)]
        samples: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory with a torus.json to reuse instead of solving.
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Parameter override `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    #[arg(long)]
    mesh_intervals: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    /// Fourier modes of a torus.
    #[arg(long = "N")]
    modes: Option<usize>,
    #[arg(long)]
    rk_steps: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// series, kronecker, fixed_point or direct.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    periods: Option<f64>,
    #[arg(long)]
    trajectories: Option<u64>,
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    thinning: Option<u64>,
    #[arg(long)]
    bins: Option<usize>,
    /// psi or tau.
    #[arg(long)]
    bin_by: Option<String>,
    /// points or crossings.
    #[arg(long)]
    sampling: Option<String>,
    #[arg(long)]
    tau_star: Option<f64>,
    #[arg(long)]
    min_count: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn config(&self) -> CliResult<RunConfig> {
        let file = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let mut flags = RunConfig { problem: self.problem.clone(), ..Default::default() };
        for p in &self.params {
            let (name, value) = p
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("parameter override {p} is not NAME=VALUE")))?;
            let value = value.parse().map_err(|_| CliError::config(format!("parameter value {value} is not a number")))?;
            flags.params.insert(name.to_string(), value);
        }
        flags.output.directory = self.out.clone();
        flags.output.geometry = self.geometry.clone();
        let s = &mut flags.solver;
        (s.mesh_intervals, s.degree, s.modes, s.rk_steps, s.tol, s.rho) =
            (self.mesh_intervals, self.degree, self.modes, self.rk_steps, self.tol, self.rho);
        flags.covariance.method = self.method.clone();
        let d = &mut flags.sde;
        (d.sigma, d.dt, d.periods, d.trajectories, d.burn_in, d.seed, d.thinning) =
            (self.sigma, self.dt, self.periods, self.trajectories, self.burn_in, self.seed, self.thinning);
        (d.bins, d.bin_by, d.sampling, d.tau_star, d.min_count, d.threads) = (
            self.bins,
            self.bin_by.clone(),
            self.sampling.clone(),
            self.tau_star,
            self.min_count,
            self.threads,
        );
        Ok(file.merge(&flags))
    }
}

fn run(cli: Cli) -> CliResult<serde_json::Value> {
    match cli.command {
        Command::Cycle(c) => cmd_cycle(&c.config()?.resolve()?),
        Command::Torus(c) => cmd_torus(&c.config()?.resolve()?),
        Command::Simulate(c) => cmd_simulate(&c.config()?.resolve()?),
        Command::Compare { common, samples } => cmd_compare(&common.config()?.resolve()?, &samples),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::config(e.to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
