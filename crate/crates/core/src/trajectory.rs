//! Continuous piecewise-polynomial functions on a uniform mesh of `[0, t_end]`.

#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::inverse;

/// A vector-valued piecewise polynomial on a uniform mesh.
///
/// Each interval stores monomial coefficients in the local variable `s ∈ [0, 1]`.
/// Matrix-valued functions are stored column-major with `dim = rows * cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    t_end: f64,
    intervals: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

impl Trajectory {
    /// Piecewise cubic Hermite interpolant through `values` with slopes `derivs`,
    /// both laid out as `intervals + 1` consecutive blocks of length `dim`.
    pub fn from_hermite(dim: usize, t_end: f64, values: &[f64], derivs: &[f64]) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) || values.len() != derivs.len() {
            return Err(Error::DimensionMismatch {
                what: "hermite data",
                expected: values.len(),
                found: derivs.len(),
            });
        }
        let points = values.len() / dim;
        if points < 2 || !(t_end > 0.0) {
            return Err(Error::InvalidArgument("hermite data needs two points and positive span".into()));
        }
        let intervals = points - 1;
        let h = t_end / intervals as f64;
        let mut coeffs = vec![0.0; intervals * 4 * dim];
        for i in 0..intervals {
            let base = i * 4 * dim;
            for k in 0..dim {
                let y0 = values[i * dim + k];
                let y1 = values[(i + 1) * dim + k];
                let d0 = h * derivs[i * dim + k];
                let d1 = h * derivs[(i + 1) * dim + k];
                coeffs[base + k] = y0;
                coeffs[base + dim + k] = d0;
                coeffs[base + 2 * dim + k] = 3.0 * (y1 - y0) - 2.0 * d0 - d1;
                coeffs[base + 3 * dim + k] = 2.0 * (y0 - y1) + d0 + d1;
            }
        }
        Ok(Self { dim, t_end, intervals, degree: 3, coeffs })
    }

    /// Interpolant of degree `degree` through values at the uniform base points
    /// `s = b/degree` of every interval; `values` holds `intervals*degree + 1` blocks.
    pub fn from_base_points(
        dim: usize,
        t_end: f64,
        intervals: usize,
        degree: usize,
        values: &[f64],
    ) -> Result<Self> {
        let expected = (intervals * degree + 1) * dim;
        if dim == 0 || intervals == 0 || degree == 0 || values.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "base-point data",
                expected,
                found: values.len(),
            });
        }
        let vinv = monomial_from_uniform(degree)?;
        let mut coeffs = vec![0.0; intervals * (degree + 1) * dim];
        for i in 0..intervals {
            let base = i * (degree + 1) * dim;
            for k in 0..dim {
                for c in 0..=degree {
                    let mut acc = 0.0;
                    for b in 0..=degree {
                        acc += vinv[(c, b)] * values[(i * degree + b) * dim + k];
                    }
                    coeffs[base + c * dim + k] = acc;
                }
            }
        }
        Ok(Self { dim, t_end, intervals, degree, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Mesh step.
    pub fn step(&self) -> f64 {
        self.t_end / self.intervals as f64
    }

    /// Mesh times `k * step` for `k = 0..=intervals`.
    pub fn mesh(&self) -> Vec<f64> {
        let h = self.step();
        (0..=self.intervals).map(|k| k as f64 * h).collect()
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let u = t / self.step();
        let i = if u <= 0.0 {
            0
        } else {
            (u as usize).min(self.intervals - 1)
        };
        (i, u - i as f64)
    }

    /// Value at `t`; arguments outside `[0, t_end]` extrapolate the end polynomials.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let (i, s) = self.locate(t);
        let stride = self.dim;
        let base = i * (self.degree + 1) * stride;
        for (k, o) in out.iter_mut().enumerate().take(stride) {
            let mut acc = self.coeffs[base + self.degree * stride + k];
            for c in (0..self.degree).rev() {
                acc = acc * s + self.coeffs[base + c * stride + k];
            }
            *o = acc;
        }
    }

    /// Time derivative at `t`.
    pub fn deriv_into(&self, t: f64, out: &mut [f64]) {
        let (i, s) = self.locate(t);
        let stride = self.dim;
        let base = i * (self.degree + 1) * stride;
        let inv_h = 1.0 / self.step();
        for (k, o) in out.iter_mut().enumerate().take(stride) {
            let mut acc = self.degree as f64 * self.coeffs[base + self.degree * stride + k];
            for c in (1..self.degree).rev() {
                acc = acc * s + c as f64 * self.coeffs[base + c * stride + k];
            }
            *o = acc * inv_h;
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        self.eval_into(t, out.as_mut_slice());
        out
    }

    pub fn deriv(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        self.deriv_into(t, out.as_mut_slice());
        out
    }

    /// Value at the `k`-th mesh point, read off exactly from the coefficients.
    pub fn node(&self, k: usize) -> DVector<f64> {
        if k < self.intervals {
            let base = k * (self.degree + 1) * self.dim;
            DVector::from_column_slice(&self.coeffs[base..base + self.dim])
        } else {
            self.eval(self.t_end)
        }
    }

    /// Matrix value at `t` for a function stored column-major with `rows` rows.
    pub fn eval_matrix(&self, t: f64, rows: usize) -> DMatrix<f64> {
        let v = self.eval(t);
        DMatrix::from_column_slice(rows, self.dim / rows, v.as_slice())
    }

    pub fn node_matrix(&self, k: usize, rows: usize) -> DMatrix<f64> {
        let v = self.node(k);
        DMatrix::from_column_slice(rows, self.dim / rows, v.as_slice())
    }

    /// Largest jump between adjacent interval polynomials at interior mesh points.
    pub fn continuity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        let stride = self.dim;
        for i in 0..self.intervals.saturating_sub(1) {
            let base = i * (self.degree + 1) * stride;
            let next = (i + 1) * (self.degree + 1) * stride;
            for k in 0..stride {
                let end: f64 = (0..=self.degree).map(|c| self.coeffs[base + c * stride + k]).sum();
                worst = worst.max((end - self.coeffs[next + k]).abs());
            }
        }
        worst
    }

    /// Raw per-interval monomial coefficients, interval-major then power then component.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Rebuilds a trajectory from parts previously obtained through the accessors.
    pub fn from_parts(
        dim: usize,
        t_end: f64,
        intervals: usize,
        degree: usize,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        let expected = intervals * (degree + 1) * dim;
        if dim == 0 || intervals == 0 || coeffs.len() != expected || !(t_end > 0.0) {
            return Err(Error::DimensionMismatch {
                what: "trajectory coefficients",
                expected,
                found: coeffs.len(),
            });
        }
        Ok(Self { dim, t_end, intervals, degree, coeffs })
    }
}

/// Matrix mapping values at `s = b/degree` to monomial coefficients.
fn monomial_from_uniform(degree: usize) -> Result<DMatrix<f64>> {
    let vander = DMatrix::from_fn(degree + 1, degree + 1, |b, c| {
        let s = b as f64 / degree as f64;
        s.powi(c as i32)
    });
    inverse(&vander, "uniform Vandermonde")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubics() {
        let n = 7;
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let df = |t: f64| -2.0 + 1.5 * t * t;
        let vals: Vec<f64> = (0..=n).map(|k| f(k as f64 / n as f64 * 2.0)).collect();
        let ders: Vec<f64> = (0..=n).map(|k| df(k as f64 / n as f64 * 2.0)).collect();
        let tr = Trajectory::from_hermite(1, 2.0, &vals, &ders).unwrap();
        for t in [0.0, 0.13, 0.77, 1.5, 2.0] {
            assert!((tr.eval(t)[0] - f(t)).abs() < 1e-13);
            assert!((tr.deriv(t)[0] - df(t)).abs() < 1e-12);
        }
        assert!(tr.continuity_defect() < 1e-14);
    }

    #[test]
    fn base_points_reproduce_polynomials_of_degree() {
        let (m, d) = (3, 4);
        let f = |t: f64| (t - 0.3).powi(4) - t;
        let vals: Vec<f64> = (0..=m * d).map(|k| f(k as f64 / (m * d) as f64)).collect();
        let tr = Trajectory::from_base_points(1, 1.0, m, d, &vals).unwrap();
        for t in [0.05, 0.4, 0.99] {
            assert!((tr.eval(t)[0] - f(t)).abs() < 1e-13);
        }
        assert!((tr.node(m)[0] - f(1.0)).abs() < 1e-13);
    }
}
