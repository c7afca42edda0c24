//! Gauss–Legendre collocation with interval-by-interval condensation.
//!
//! A segment is a continuous piecewise polynomial of degree `d` on `M` uniform intervals of
//! `[0, 1]`, represented by its values at the `M d + 1` uniform base points. Linearized
//! collocation equations are eliminated interval by interval so that Newton's method only
//! solves a small dense system in the segment start values and the free scalars.

#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::model::Problem;
use crate::trajectory::Trajectory;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(degree: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(degree);
    let mut weights = Vec::with_capacity(degree);
    for i in 0..degree {
        let mut x = (PI * (i as f64 + 0.75) / (degree as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(degree, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(degree, x);
        if d != 0.0 {
            dp = d;
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Mesh, collocation nodes and Lagrange tables shared by all segments.
#[derive(Debug, Clone)]
pub struct CollocationScheme {
    intervals: usize,
    degree: usize,
    nodes: Vec<f64>,
    /// `lag[(l, b)] = L_b(c_l)` for the uniform base points `b / degree`.
    lag: DMatrix<f64>,
    /// `dlag[(l, b)] = L_b'(c_l)` in the local variable.
    dlag: DMatrix<f64>,
}

impl CollocationScheme {
    pub fn new(intervals: usize, degree: usize) -> Result<Self> {
        if intervals == 0 || degree == 0 {
            return Err(Error::InvalidArgument("mesh intervals and degree must be positive".into()));
        }
        let (nodes, _) = gauss_legendre(degree);
        let base: Vec<f64> = (0..=degree).map(|b| b as f64 / degree as f64).collect();
        let mut lag = DMatrix::zeros(degree, degree + 1);
        let mut dlag = DMatrix::zeros(degree, degree + 1);
        for (l, &c) in nodes.iter().enumerate() {
            for b in 0..=degree {
                let mut value = 1.0;
                let mut slope = 0.0;
                for a in 0..=degree {
                    if a == b {
                        continue;
                    }
                    let denom = base[b] - base[a];
                    slope = slope * (c - base[a]) / denom + value / denom;
                    value *= (c - base[a]) / denom;
                }
                lag[(l, b)] = value;
                dlag[(l, b)] = slope;
            }
        }
        Ok(Self { intervals, degree, nodes, lag, dlag })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn step(&self) -> f64 {
        1.0 / self.intervals as f64
    }

    pub fn base_points(&self) -> usize {
        self.intervals * self.degree + 1
    }

    /// Time of base point `g` (global index).
    pub fn base_time(&self, g: usize) -> f64 {
        g as f64 / (self.intervals * self.degree) as f64
    }

    /// Samples `f` at all base points, flattened.
    pub fn sample(&self, dim: usize, f: &dyn Fn(f64) -> DVector<f64>) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.base_points() * dim);
        for g in 0..self.base_points() {
            let v = f(self.base_time(g));
            if v.len() != dim {
                return Err(Error::DimensionMismatch { what: "guess", expected: dim, found: v.len() });
            }
            out.extend_from_slice(v.as_slice());
        }
        Ok(out)
    }

    pub fn trajectory(&self, dim: usize, values: &[f64]) -> Result<Trajectory> {
        Trajectory::from_base_points(dim, 1.0, self.intervals, self.degree, values)
    }
}

/// Linear collocation data at one node: `ẏ - A y - U q = g`.
pub struct NodeData {
    pub a: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub g: DVector<f64>,
}

/// Interior values of one interval as affine functions of its start value and the free scalars.
struct IntervalMap {
    y0: DMatrix<f64>,
    yq: DMatrix<f64>,
    yg: DVector<f64>,
}

/// Affine map from segment start value and free scalars to all base-point values.
pub struct SegmentCondensation {
    dim: usize,
    degree: usize,
    maps: Vec<IntervalMap>,
    /// End value `= phi * y0 + phi_q * q + phi_g`.
    pub phi: DMatrix<f64>,
    pub phi_q: DMatrix<f64>,
    pub phi_g: DVector<f64>,
}

impl SegmentCondensation {
    /// Eliminates interior unknowns given node data ordered interval-major.
    pub fn new(scheme: &CollocationScheme, dim: usize, nq: usize, data: &[NodeData]) -> Result<Self> {
        let d = scheme.degree;
        let h = scheme.step();
        let q = dim;
        let mut maps = Vec::with_capacity(scheme.intervals);
        let mut phi = DMatrix::<f64>::identity(q, q);
        let mut phi_q = DMatrix::<f64>::zeros(q, nq);
        let mut phi_g = DVector::<f64>::zeros(q);
        for i in 0..scheme.intervals {
            let mut k = DMatrix::zeros(d * q, d * q);
            let mut rhs = DMatrix::zeros(d * q, q + nq + 1);
            for l in 0..d {
                let node = &data[i * d + l];
                for b in 0..=d {
                    let mut block = &node.a * (-scheme.lag[(l, b)]);
                    for r in 0..q {
                        block[(r, r)] += scheme.dlag[(l, b)] / h;
                    }
                    if b == 0 {
                        rhs.view_mut((l * q, 0), (q, q)).copy_from(&(-block));
                    } else {
                        k.view_mut((l * q, (b - 1) * q), (q, q)).copy_from(&block);
                    }
                }
                rhs.view_mut((l * q, q), (q, nq)).copy_from(&node.u);
                rhs.view_mut((l * q, q + nq), (q, 1)).copy_from(&node.g);
            }
            let sol = Lu::new(k, "collocation interval")?.solve_mat(&rhs);
            let map = IntervalMap {
                y0: sol.columns(0, q).into_owned(),
                yq: sol.columns(q, nq).into_owned(),
                yg: sol.column(q + nq).into_owned(),
            };
            let last = (d - 1) * q;
            let s = map.y0.rows(last, q).into_owned();
            let sq = map.yq.rows(last, q).into_owned();
            let sg = map.yg.rows(last, q).into_owned();
            phi_q = &s * &phi_q + sq;
            phi_g = &s * &phi_g + sg;
            phi = &s * &phi;
            maps.push(map);
        }
        Ok(Self { dim, degree: d, maps, phi, phi_q, phi_g })
    }

    /// All base-point values for the given start value and free scalars, flattened.
    pub fn expand(&self, y0: &DVector<f64>, q: &DVector<f64>) -> Vec<f64> {
        let n = self.dim;
        let mut out = Vec::with_capacity((self.maps.len() * self.degree + 1) * n);
        out.extend_from_slice(y0.as_slice());
        let mut start = y0.clone();
        for map in &self.maps {
            let interior = &map.y0 * &start + &map.yq * q + &map.yg;
            out.extend_from_slice(interior.as_slice());
            start = interior.rows((self.degree - 1) * n, n).into_owned();
        }
        out
    }
}

/// Which scalars besides the segment values are Newton unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreeScalars {
    pub period: bool,
    pub param: Option<usize>,
}

impl FreeScalars {
    pub fn count(&self) -> usize {
        self.period as usize + self.param.is_some() as usize
    }
}

/// Linearizes `ẋ = T f(t, x; p)` around a segment and returns the condensation together
/// with the largest collocation residual.
pub fn linearize_segment(
    problem: &Problem,
    scheme: &CollocationScheme,
    values: &[f64],
    period: f64,
    params: &[f64],
    free: FreeScalars,
) -> Result<(SegmentCondensation, f64)> {
    let n = problem.dim();
    let d = scheme.degree;
    let h = scheme.step();
    let nq = free.count();
    let mut data = Vec::with_capacity(scheme.intervals * d);
    let mut worst = 0.0f64;
    let mut x = vec![0.0; n];
    let mut xdot = vec![0.0; n];
    for i in 0..scheme.intervals {
        for l in 0..d {
            x.iter_mut().for_each(|v| *v = 0.0);
            xdot.iter_mut().for_each(|v| *v = 0.0);
            for b in 0..=d {
                let g = i * d + b;
                for k in 0..n {
                    x[k] += scheme.lag[(l, b)] * values[g * n + k];
                    xdot[k] += scheme.dlag[(l, b)] / h * values[g * n + k];
                }
            }
            let t = (i as f64 + scheme.nodes[l]) * h;
            let f = problem.drift_with(t, &x, params);
            let mut g = DVector::zeros(n);
            for k in 0..n {
                g[k] = period * f[k] - xdot[k];
            }
            worst = worst.max(g.amax());
            let a = problem.jacobian_with(t, &x, params) * period;
            let mut u = DMatrix::zeros(n, nq);
            let mut col = 0;
            if free.period {
                u.set_column(col, &f);
                col += 1;
            }
            if let Some(idx) = free.param {
                u.set_column(col, &(problem.drift_param_derivative(t, &x, params, idx) * period));
            }
            data.push(NodeData { a, u, g });
        }
    }
    if !worst.is_finite() {
        return Err(Error::NonFinite("collocation residual"));
    }
    Ok((SegmentCondensation::new(scheme, n, nq, &data)?, worst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_high_degree() {
        let (x, w) = gauss_legendre(4);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert!((integral - 1.0 / 8.0).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lagrange_tables_differentiate_polynomials() {
        let s = CollocationScheme::new(1, 3).unwrap();
        let f = |t: f64| 2.0 * t * t * t - t;
        for l in 0..3 {
            let c = s.nodes[l];
            let v: f64 = (0..=3).map(|b| s.lag[(l, b)] * f(b as f64 / 3.0)).sum();
            let dv: f64 = (0..=3).map(|b| s.dlag[(l, b)] * f(b as f64 / 3.0)).sum();
            assert!((v - f(c)).abs() < 1e-14);
            assert!((dv - (6.0 * c * c - 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn condensation_solves_scalar_decay() {
        // ẏ = -y, y(0) = 1 over [0, 1].
        let s = CollocationScheme::new(10, 4).unwrap();
        let data: Vec<NodeData> = (0..40)
            .map(|_| NodeData {
                a: DMatrix::from_element(1, 1, -1.0),
                u: DMatrix::zeros(1, 0),
                g: DVector::zeros(1),
            })
            .collect();
        let c = SegmentCondensation::new(&s, 1, 0, &data).unwrap();
        assert!((c.phi[(0, 0)] - (-1.0f64).exp()).abs() < 1e-13);
        let vals = c.expand(&DVector::from_element(1, 1.0), &DVector::zeros(0));
        assert!((vals[20] - (-0.5f64).exp()).abs() < 1e-12);
    }
}
