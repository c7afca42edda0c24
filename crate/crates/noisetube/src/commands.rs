//! The four command verbs. Each writes its files into the configured directory and returns
//! a short JSON summary for standard output.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use noisetube_core::cycle::covariance_eigens;
use noisetube_core::linalg::{sorted_symmetric_eigen, spectral_norm};
use noisetube_core::section::{CycleGeometry, SamplingMode, SectionCoords, SectionGeometry, SectionSample, TorusGeometry};
use noisetube_core::stats::{BinBy, BinnedStats, binned_stats, empirical_covariance, relative_frobenius};
use noisetube_core::torus::{TorusSolution, adjoint_normalization_error};
use serde_json::{Value, json};

use crate::config::{BinAxis, Resolved, Sampling};
use crate::ensemble::{EnsembleOutput, EnsembleSpec, run_ensemble};
use crate::error::{CliError, CliResult};
use crate::io::{Table, TorusFile, columns, ensure_dir, num, read_json, write_json};
use crate::setup::{CyclePipeline, TorusPipeline, solve_cycle, solve_torus_for, torus_pipeline};

/// Time samples per segment in the torus tables.
const TORUS_TABLE_TIMES: usize = 100;

fn params_json(p: &noisetube_core::model::Problem) -> Value {
    p.param_names().zip(p.param_values()).map(|(k, v)| (k.to_string(), json!(v))).collect()
}

fn vec_entries(m: &DMatrix<f64>) -> Vec<String> {
    m.iter().map(|v| num(*v)).collect()
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    json!((0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>())
}

/// Writes `orbit.csv`, `adjoint.csv`, `covariance.csv` and `diagnostics.json`.
pub fn cmd_cycle(r: &Resolved) -> CliResult<Value> {
    let pl = solve_cycle(r)?;
    let dir = ensure_dir(&r.directory)?;
    let orbit = &pl.orbit;
    let n = orbit.problem().dim();
    let steps = orbit.flow().steps();
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();

    let mut t = Table::new(std::iter::once("t".to_string()).chain(columns("x", n)));
    for (k, &tk) in times.iter().enumerate() {
        let x = orbit.flow().state_node(k);
        t.push(std::iter::once(num(tk)).chain(x.iter().map(|v| num(*v))).collect());
    }
    t.write(&dir.join("orbit.csv"))?;

    let mut t = Table::new(std::iter::once("t".to_string()).chain(columns("lambda", n)));
    for (k, &tk) in times.iter().enumerate() {
        if let Some(l) = pl.adjoint.lambda_node(k) {
            t.push(std::iter::once(num(tk)).chain(l.iter().map(|v| num(*v))).collect());
        }
    }
    t.write(&dir.join("adjoint.csv"))?;

    let eig = covariance_eigens(&pl.covariance);
    let mut header = vec!["t".to_string()];
    for j in 1..=n {
        for i in 1..=n {
            header.push(format!("c_{i}_{j}"));
        }
    }
    header.extend(columns("eig", n));
    for k in 1..=n {
        header.extend(columns(&format!("vec{k}"), n));
    }
    let mut t = Table::new(header);
    for (k, &tk) in eig.times.iter().enumerate() {
        let mut row = vec![num(tk)];
        row.extend(vec_entries(&pl.covariance.node(k)));
        row.extend(eig.values[k].iter().map(|v| num(*v)));
        row.extend(vec_entries(&eig.vectors[k]));
        t.push(row);
    }
    t.write(&dir.join("covariance.csv"))?;

    let diagnostics = cycle_diagnostics(r, &pl);
    write_json(&dir.join("diagnostics.json"), &diagnostics)?;
    Ok(json!({ "command": "cycle", "directory": dir, "period": orbit.period() }))
}

fn cycle_diagnostics(r: &Resolved, pl: &CyclePipeline) -> Value {
    let orbit = &pl.orbit;
    let m = orbit.monodromy();
    json!({
        "problem": orbit.problem().name(),
        "params": params_json(orbit.problem()),
        "autonomous": orbit.is_autonomous(),
        "period": orbit.period(),
        "newton": { "iterations": orbit.newton_iterations(), "residual": orbit.newton_residual() },
        "periodicity_defect": orbit.periodicity_defect(),
        "monodromy": {
            "eigenvalues": m.eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "moduli": m.eigenvalues.iter().map(|z| z.norm()).collect::<Vec<_>>(),
            "trivial_index": m.trivial,
            "transversal_radius": m.transversal_radius,
            "transversally_stable": m.is_transversally_stable(),
            "tangent_residual": m.tangent_residual,
        },
        "adjoint_w": pl.projection.adjoint().lambda(0.0).map(|v| v.as_slice().to_vec()),
        "covariance": {
            "method": r.method.name(),
            "c0": matrix_json(&pl.stationary.c0),
            "series_terms": pl.stationary.terms,
            "a_diagnostic": pl.stationary.conserved,
            "route_gap": pl.route_gap,
            "ode_discrepancy": pl.covariance.ode_discrepancy,
            "periodicity_defect": pl.covariance.periodicity_defect,
            "symmetry_breaking": pl.covariance.symmetry_breaking,
        },
    })
}

/// Loads `torus.json` from the configured geometry directory, or solves the torus.
pub fn load_or_solve_torus(r: &Resolved) -> CliResult<TorusSolution> {
    match &r.geometry {
        Some(dir) => {
            let file: TorusFile = read_json(&dir.join("torus.json"))?;
            if file.problem != r.problem {
                return Err(CliError::config(format!("{} holds a torus of {}", dir.display(), file.problem)));
            }
            file.to_solution()
        }
        None => solve_torus_for(r),
    }
}

/// Writes `torus.json`, `adjoints.csv`, `covariance_nodes.csv` and `diagnostics.json`.
pub fn cmd_torus(r: &Resolved) -> CliResult<Value> {
    let sol = solve_torus_for(r)?;
    let pl = torus_pipeline(&sol, r.method)?;
    let dir = ensure_dir(&r.directory)?;
    write_json(&dir.join("torus.json"), &TorusFile::from_solution(&sol))?;
    let n = sol.dim();
    let steps = sol.rk_steps();
    let adj = pl.projection.adjoints();
    let autonomous = sol.problem().is_autonomous();

    let mut header = vec!["node".to_string(), "phi".into(), "t".into()];
    if autonomous {
        header.extend(columns("lambda_t", n));
    }
    header.extend(columns("lambda_phi", n));
    let mut t = Table::new(header);
    let mut cov_table = Table::new(
        ["node", "phi", "t"].into_iter().map(String::from).chain(columns("eig", n)).chain({
            let mut c = Vec::new();
            for j in 1..=n {
                for i in 1..=n {
                    c.push(format!("c_{i}_{j}"));
                }
            }
            c
        }),
    );
    let mut min_rank = usize::MAX;
    let mut max_rank = 0;
    for (j, &phi) in sol.ops().nodes().iter().enumerate() {
        for s in 0..=TORUS_TABLE_TIMES {
            let k = s * steps / TORUS_TABLE_TIMES;
            let tk = k as f64 / steps as f64;
            let mut row = vec![j.to_string(), num(phi), num(tk)];
            if let Some(l) = adj.lambda_t(j, tk) {
                row.extend(l.iter().map(|v| num(*v)));
            }
            row.extend(adj.lambda_phi(j, tk).iter().map(|v| num(*v)));
            t.push(row);
            let c = pl.covariance.node_at(&pl.projection, j, k);
            let (vals, _) = sorted_symmetric_eigen(&c);
            if s == 0 {
                let cutoff = 1e-6 * vals[0];
                let rank = vals.iter().filter(|v| **v > cutoff).count();
                min_rank = min_rank.min(rank);
                max_rank = max_rank.max(rank);
            }
            let mut row = vec![j.to_string(), num(phi), num(tk)];
            row.extend(vals.iter().map(|v| num(*v)));
            row.extend(vec_entries(&c));
            cov_table.push(row);
        }
    }
    t.write(&dir.join("adjoints.csv"))?;
    cov_table.write(&dir.join("covariance_nodes.csv"))?;

    let cov = &pl.covariance;
    let diagnostics = json!({
        "problem": sol.problem().name(),
        "params": params_json(sol.problem()),
        "free_param": sol.free_param(),
        "N": sol.ops().modes(),
        "rho": sol.rho(),
        "period": sol.period(),
        "newton": { "iterations": sol.newton_iterations(), "residual": sol.newton_residual() },
        "boundary_defect": sol.boundary_defect(),
        "flow_boundary_defect": sol.flow_boundary_defect(),
        "cocycle_defect": sol.cocycle_defect(),
        "adjoint_normalization_defect": adj.normalization_defect,
        "adjoint_normalization_error": adjoint_normalization_error(&sol, adj, 40),
        "covariance": {
            "method": r.method.name(),
            "A_norm_2": spectral_norm(&cov.a),
            "iterations": cov.iterations,
            "zero_level": cov.zero_level,
            "tangential_leak": cov.tangential_leak,
            "contraction_estimate": cov.contraction_estimate,
            "quasiperiodicity_defect": cov.quasiperiodicity_defect(&pl.projection),
            "level_drift": cov.level_drift(&pl.projection, 20),
            "rank_range_at_t0": [min_rank, max_rank],
        },
    });
    write_json(&dir.join("diagnostics.json"), &diagnostics)?;
    Ok(json!({ "command": "torus", "directory": dir, "A_norm_2": spectral_norm(&cov.a) }))
}

/// Result of a Monte-Carlo run with its statistics.
pub struct Simulation {
    pub output: EnsembleOutput,
    pub stats: BinnedStats,
    pub comparison: Value,
    pub rank: usize,
}

fn bin_by(axis: BinAxis) -> BinBy {
    match axis {
        BinAxis::Psi => BinBy::Psi,
        BinAxis::Tau => BinBy::Tau,
    }
}

/// Runs the configured ensemble around the problem's invariant object.
pub fn simulate(r: &Resolved) -> CliResult<Simulation> {
    let spec = EnsembleSpec {
        sigma: r.sigma,
        dt: r.dt,
        seed: r.seed,
        thinning: r.thinning,
        trajectories: r.trajectories,
        periods: r.periods,
        burn_in: r.burn_in,
        mode: match r.sampling {
            Sampling::Points => SamplingMode::EveryPoint,
            Sampling::Crossings => SamplingMode::Crossings { tau_star: r.tau_star },
        },
    };
    let (geometry, problem, period, starts): (Box<dyn SectionGeometry>, _, f64, Vec<DVector<f64>>) = if r.torus {
        let sol = load_or_solve_torus(r)?;
        let TorusPipeline { projection, covariance } = torus_pipeline(&sol, r.method)?;
        let geom = TorusGeometry::new(&projection, &covariance, sol.rk_steps())?;
        let starts =
            (0..r.trajectories).map(|i| sol.gamma_at(i as f64 / r.trajectories as f64, 0.0)).collect();
        (Box::new(geom), sol.problem().clone(), sol.period(), starts)
    } else {
        let pl = solve_cycle(r)?;
        let geom = CycleGeometry::new(&pl.orbit, &pl.adjoint, &pl.covariance);
        (Box::new(geom), pl.orbit.problem().clone(), pl.orbit.period(), vec![pl.orbit.gamma(0.0)])
    };
    let start = |i: u64| (starts[i as usize % starts.len()].as_slice().to_vec(), 0.0);
    let output = run_ensemble(&problem, period, &*geometry, &start, &spec, r.threads)?;
    let stats = binned_stats(&output.samples, r.bins, bin_by(r.bin_by))?;
    let mut comparison = compare_stats(r, &stats, output.samples.len(), output.failures);
    comparison["covariance"] = covariance_checks(r, &*geometry, &output.samples, &stats)?;
    Ok(Simulation { rank: geometry.transversal_rank(), output, stats, comparison })
}

/// Per-bin empirical covariance of `x_tr` against the mean of `σ² C` over the same samples.
fn covariance_checks(
    r: &Resolved,
    geometry: &dyn SectionGeometry,
    samples: &[SectionSample],
    stats: &BinnedStats,
) -> CliResult<Value> {
    let mut out = Vec::new();
    for b in 0..stats.bins() {
        if stats.counts[b] < r.min_count.max(2) {
            continue;
        }
        let members: Vec<&SectionSample> = samples.iter().filter(|s| bin_index(r, stats, s) == b).collect();
        let empirical = empirical_covariance(members.iter().copied())?;
        let n = geometry.dim();
        let mut predicted = DMatrix::zeros(n, n);
        for s in &members {
            predicted += geometry.covariance(s.coords) * (r.sigma * r.sigma / members.len() as f64);
        }
        out.push(json!({
            "bin": b,
            "count": members.len(),
            "relative_frobenius": relative_frobenius(&empirical, &predicted),
            "empirical": matrix_json(&empirical),
            "predicted": matrix_json(&predicted),
        }));
    }
    Ok(Value::Array(out))
}

fn bin_index(r: &Resolved, stats: &BinnedStats, s: &SectionSample) -> usize {
    let v = match r.bin_by {
        BinAxis::Psi => s.coords.psi,
        BinAxis::Tau => s.coords.tau,
    };
    let bins = stats.bins();
    ((v - v.floor()) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize
}

/// Std ratios per bin and the fraction of compared bins inside the band, per component.
pub fn compare_stats(r: &Resolved, stats: &BinnedStats, samples: usize, failures: usize) -> Value {
    let width = stats.std.first().map_or(0, Vec::len);
    let min_count = r.min_count.max(2);
    let ratios: Vec<Vec<Option<f64>>> = (0..stats.bins())
        .map(|b| {
            (0..width)
                .map(|i| (stats.counts[b] >= min_count).then(|| stats.std[b][i] / stats.predicted_std[b][i]))
                .collect()
        })
        .collect();
    let components: Vec<Value> = (0..width)
        .map(|i| {
            let compared: Vec<f64> = ratios.iter().filter_map(|row| row[i]).collect();
            let within = compared.iter().filter(|q| **q >= r.band[0] && **q <= r.band[1]).count();
            json!({
                "component": i + 1,
                "compared_bins": compared.len(),
                "within_band": within,
                "fraction_within": if compared.is_empty() { Value::Null } else { json!(within as f64 / compared.len() as f64) },
            })
        })
        .collect();
    json!({
        "problem": r.problem,
        "sampling": match r.sampling { Sampling::Points => "points", Sampling::Crossings => "crossings" },
        "tau_star": (r.sampling == Sampling::Crossings).then_some(r.tau_star),
        "bin_by": match r.bin_by { BinAxis::Psi => "psi", BinAxis::Tau => "tau" },
        "bins": stats.bins(),
        "samples": samples,
        "failures": failures,
        "band": r.band,
        "min_count": min_count,
        "components": components,
        "ratios": ratios,
    })
}

fn samples_table(samples: &[SectionSample], n: usize, rank: usize, r: &Resolved, stats: &BinnedStats) -> Table {
    let header = ["trajectory", "step", "psi", "tau"]
        .into_iter()
        .map(String::from)
        .chain(columns("x", n))
        .chain(columns("xtr", n))
        .chain(columns("proj", rank))
        .chain(columns("var", rank))
        .chain(["residual".to_string(), "bin_id".to_string()]);
    let mut t = Table::new(header);
    for s in samples {
        let mut row = vec![s.trajectory.to_string(), s.step.to_string(), num(s.coords.psi), num(s.coords.tau)];
        row.extend(s.x.iter().chain(&s.x_tr).chain(&s.projections).chain(&s.predicted_var).map(|v| num(*v)));
        row.push(num(s.residual));
        row.push(bin_index(r, stats, s).to_string());
        t.push(row);
    }
    t
}

fn bins_table(stats: &BinnedStats) -> Table {
    let width = stats.std.first().map_or(0, Vec::len);
    let header = ["bin_id", "lo", "hi", "count"]
        .into_iter()
        .map(String::from)
        .chain(columns("mean", width))
        .chain(columns("std", width))
        .chain(columns("predicted_std", width));
    let mut t = Table::new(header);
    for b in 0..stats.bins() {
        let mut row = vec![b.to_string(), num(stats.edges[b]), num(stats.edges[b + 1]), stats.counts[b].to_string()];
        row.extend(stats.mean[b].iter().chain(&stats.std[b]).chain(&stats.predicted_std[b]).map(|v| num(*v)));
        t.push(row);
    }
    t
}

/// Writes `samples.csv`, `bins.csv` and `compare.json`.
pub fn cmd_simulate(r: &Resolved) -> CliResult<Value> {
    let sim = simulate(r)?;
    let dir = ensure_dir(&r.directory)?;
    let n = sim.output.samples.first().map_or(0, |s| s.x.len());
    samples_table(&sim.output.samples, n, sim.rank, r, &sim.stats).write(&dir.join("samples.csv"))?;
    bins_table(&sim.stats).write(&dir.join("bins.csv"))?;
    write_json(&dir.join("compare.json"), &sim.comparison)?;
    Ok(json!({
        "command": "simulate",
        "directory": dir,
        "samples": sim.output.samples.len(),
        "failures": sim.output.failures,
        "components": sim.comparison["components"],
    }))
}

/// Parses a `samples.csv` written by `simulate`.
pub fn read_samples(path: &Path) -> CliResult<Vec<SectionSample>> {
    let table = Table::read(path)?;
    let bad = |message: String| CliError::Format { what: path.display().to_string(), message };
    let count = |prefix: &str| table.header().iter().filter(|h| h.starts_with(&format!("{prefix}_"))).count();
    let (n, rank) = (count("x"), count("proj"));
    let at = |name: &str| table.column(name).ok_or_else(|| bad(format!("missing column {name}")));
    let (traj, step, psi, tau, x1, xtr1, p1, v1, res) = (
        at("trajectory")?,
        at("step")?,
        at("psi")?,
        at("tau")?,
        at("x_1")?,
        at("xtr_1")?,
        if rank > 0 { at("proj_1")? } else { 0 },
        if rank > 0 { at("var_1")? } else { 0 },
        at("residual")?,
    );
    let float = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s}: {e}")));
    let int = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("{s}: {e}")));
    let span = |row: &[String], start: usize, len: usize| -> CliResult<Vec<f64>> {
        row[start..start + len].iter().map(|s| float(s)).collect()
    };
    table
        .rows()
        .iter()
        .map(|row| {
            Ok(SectionSample {
                trajectory: int(&row[traj])?,
                step: int(&row[step])?,
                x: span(row, x1, n)?,
                coords: SectionCoords { psi: float(&row[psi])?, tau: float(&row[tau])? },
                x_tr: span(row, xtr1, n)?,
                projections: span(row, p1, rank)?,
                predicted_var: span(row, v1, rank)?,
                residual: float(&row[res])?,
            })
        })
        .collect()
}

/// Re-bins an existing `samples.csv` and writes `bins.csv` and `compare.json` next to the
/// configured output.
pub fn cmd_compare(r: &Resolved, samples_path: &Path) -> CliResult<Value> {
    let samples = read_samples(samples_path)?;
    if samples.is_empty() {
        return Err(CliError::config(format!("{} holds no samples", samples_path.display())));
    }
    let stats = binned_stats(&samples, r.bins, bin_by(r.bin_by))?;
    let comparison = compare_stats(r, &stats, samples.len(), 0);
    let dir = ensure_dir(&r.directory)?;
    bins_table(&stats).write(&dir.join("bins.csv"))?;
    write_json(&dir.join("compare.json"), &comparison)?;
    Ok(json!({ "command": "compare", "directory": dir, "components": comparison["components"] }))
}
