//! CSV and JSON writers, and the torus file layout.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use noisetube_core::model::builtin_problem;
use noisetube_core::torus::TorusSolution;
use noisetube_core::trajectory::Trajectory;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Full double precision in scientific notation.
pub fn num(v: f64) -> String {
    format!("{v:.17e}")
}

/// A CSV file built row by row; every row must match the header width.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(&self.header).map_err(|e| csv_error(path, e))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| CliError::output(path, e))
    }

    /// Reads a CSV written by [`Table::write`].
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let header = r.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
        let mut table = Table { header, rows: Vec::new() };
        for record in r.records() {
            let record = record.map_err(|e| csv_error(path, e))?;
            table.rows.push(record.iter().map(String::from).collect());
        }
        Ok(table)
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::output(path, source),
        _ => CliError::Format { what: path.display().to_string(), message },
    }
}

/// Columns `prefix_1 … prefix_n`.
pub fn columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Format { what: path.display().to_string(), message: e.to_string() })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::output(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::ConfigFile { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| CliError::Format { what: path.display().to_string(), message: e.to_string() })
}

pub fn ensure_dir(dir: &Path) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    Ok(dir.to_path_buf())
}

/// Name of the torus layout version.
pub const TORUS_FORMAT: &str = "noisetube-torus-1";

/// Serialized torus: enough to rebuild the solution without solving again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusFile {
    pub format: String,
    pub problem: String,
    pub params: BTreeMap<String, f64>,
    pub free_param: String,
    #[serde(rename = "N")]
    pub modes: usize,
    pub rho: f64,
    pub period: f64,
    pub rk_steps: usize,
    /// Angles `φ_j` of the node segments.
    pub nodes: Vec<f64>,
    pub phase_normals: Vec<Vec<f64>>,
    pub segments: Vec<SegmentFile>,
}

/// One node segment `t ↦ γ(φ_j, t)` as piecewise polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentFile {
    pub intervals: usize,
    pub degree: usize,
    /// Interval end points.
    pub mesh: Vec<f64>,
    /// Monomial coefficients in the local variable `s ∈ [0, 1]`: interval-major, then power,
    /// then component.
    pub coefficients: Vec<f64>,
}

impl TorusFile {
    pub fn from_solution(sol: &TorusSolution) -> Self {
        let p = sol.problem();
        Self {
            format: TORUS_FORMAT.into(),
            problem: p.name().into(),
            params: p.param_names().map(String::from).zip(p.param_values().iter().copied()).collect(),
            free_param: sol.free_param().into(),
            modes: sol.ops().modes(),
            rho: sol.rho(),
            period: sol.period(),
            rk_steps: sol.rk_steps(),
            nodes: sol.ops().nodes().to_vec(),
            phase_normals: sol.phase_normals().iter().map(|v| v.as_slice().to_vec()).collect(),
            segments: sol
                .segments()
                .iter()
                .map(|s| SegmentFile {
                    intervals: s.intervals(),
                    degree: s.degree(),
                    mesh: s.mesh(),
                    coefficients: s.coefficients().to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds the solution; the fine flows are integrated again from the stored segments.
    pub fn to_solution(&self) -> CliResult<TorusSolution> {
        if self.format != TORUS_FORMAT {
            return Err(CliError::Format { what: "torus file".into(), message: format!("unknown format {}", self.format) });
        }
        let base = builtin_problem(&self.problem).map_err(|e| CliError::config(e.to_string()))?;
        let values = base
            .param_names()
            .map(|name| {
                self.params.get(name).copied().ok_or_else(|| CliError::Format {
                    what: "torus file".into(),
                    message: format!("missing parameter {name}"),
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        let problem = base.with_param_values(&values)?;
        let n = problem.dim();
        let segments = self
            .segments
            .iter()
            .map(|s| Trajectory::from_parts(n, 1.0, s.intervals, s.degree, s.coefficients.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let normals = self.phase_normals.iter().map(|v| DVector::from_column_slice(v)).collect();
        Ok(TorusSolution::from_segments(
            &problem,
            self.modes,
            self.rho,
            self.period,
            &self.free_param,
            segments,
            normals,
            self.rk_steps,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::setup::solve_torus_for;

    #[test]
    fn numbers_keep_full_precision() {
        for v in [0.1, -1.0 / 3.0, 6.02e23, 1e-300, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(0.5), "5.00000000000000000e-1");
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["1".into(), num(0.25)]);
        t.write(&path).unwrap();
        assert_eq!(Table::read(&path).unwrap(), t);
    }

    #[test]
    fn torus_file_round_trip() {
        let r = RunConfig::parse("problem = \"qp_radial\"\n[solver]\nN = 2\nrk_steps = 400\n").unwrap().resolve().unwrap();
        let sol = solve_torus_for(&r).unwrap();
        let file = TorusFile::from_solution(&sol);
        let text = serde_json::to_string(&file).unwrap();
        let back: TorusFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        let rebuilt = back.to_solution().unwrap();
        for (phi, t) in [(0.1, 0.0), (0.6, 0.45)] {
            assert_eq!(rebuilt.gamma_at(phi, t), sol.gamma_at(phi, t));
        }
        assert_eq!(rebuilt.problem().param_values(), sol.problem().param_values());
    }
}
