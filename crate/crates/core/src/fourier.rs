//! Truncated Fourier series in the torus angle, sampled at `2N + 1` uniform nodes.

#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::inverse;

/// Matrices converting between nodal values and real Fourier coefficients
/// `(a₀, a₁, b₁, …, a_N, b_N)` of a function of period 1.
#[derive(Debug, Clone)]
pub struct FourierOps {
    modes: usize,
    nodes: Vec<f64>,
    /// Rows `B(φ_j)`: coefficients to nodal values.
    synthesis: DMatrix<f64>,
    /// Nodal values to coefficients.
    analysis: DMatrix<f64>,
    /// Coefficient-space derivative: `B'(φ) = B(φ) D`.
    derivative: DMatrix<f64>,
}

impl FourierOps {
    pub fn new(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidArgument("at least one Fourier mode is required".into()));
        }
        let size = 2 * modes + 1;
        let nodes: Vec<f64> = (0..size).map(|j| j as f64 / size as f64).collect();
        let mut synthesis = DMatrix::zeros(size, size);
        for (j, &phi) in nodes.iter().enumerate() {
            synthesis.set_row(j, &basis_row(modes, phi).transpose());
        }
        let analysis = inverse(&synthesis, "Fourier synthesis")?;
        let mut derivative = DMatrix::zeros(size, size);
        for k in 1..=modes {
            let w = 2.0 * PI * k as f64;
            derivative[(2 * k - 1, 2 * k)] = w;
            derivative[(2 * k, 2 * k - 1)] = -w;
        }
        Ok(Self { modes, nodes, synthesis, analysis, derivative })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Number of nodes `2N + 1`.
    pub fn size(&self) -> usize {
        2 * self.modes + 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn synthesis(&self) -> &DMatrix<f64> {
        &self.synthesis
    }

    pub fn analysis(&self) -> &DMatrix<f64> {
        &self.analysis
    }

    pub fn derivative(&self) -> &DMatrix<f64> {
        &self.derivative
    }

    /// `B(φ)` as a column.
    pub fn basis(&self, phi: f64) -> DVector<f64> {
        basis_row(self.modes, phi)
    }

    /// `B'(φ)` as a column.
    pub fn basis_deriv(&self, phi: f64) -> DVector<f64> {
        self.derivative.transpose() * self.basis(phi)
    }

    /// Coefficient map of the shift `φ ↦ φ + ρ`: `B(φ + ρ) = B(φ) R(ρ)`.
    pub fn rotation(&self, rho: f64) -> DMatrix<f64> {
        let size = self.size();
        let mut r = DMatrix::zeros(size, size);
        r[(0, 0)] = 1.0;
        for k in 1..=self.modes {
            let (s, c) = (2.0 * PI * k as f64 * rho).sin_cos();
            r[(2 * k - 1, 2 * k - 1)] = c;
            r[(2 * k - 1, 2 * k)] = s;
            r[(2 * k, 2 * k - 1)] = -s;
            r[(2 * k, 2 * k)] = c;
        }
        r
    }

    /// Nodal map sending values of `g` to values of `g(· + ρ)` at the nodes.
    pub fn nodal_shift(&self, rho: f64) -> DMatrix<f64> {
        &self.synthesis * self.rotation(rho) * &self.analysis
    }

    /// Nodal spectral differentiation matrix.
    pub fn nodal_derivative(&self) -> DMatrix<f64> {
        &self.synthesis * &self.derivative * &self.analysis
    }

    /// Row weights `B(φ) 𝓕` interpolating nodal values at an arbitrary angle.
    pub fn interpolation_weights(&self, phi: f64) -> DVector<f64> {
        self.analysis.transpose() * self.basis(phi)
    }

    /// Row weights `B'(φ) 𝓕` for the angular derivative at an arbitrary angle.
    pub fn derivative_weights(&self, phi: f64) -> DVector<f64> {
        self.analysis.transpose() * self.basis_deriv(phi)
    }
}

fn basis_row(modes: usize, phi: f64) -> DVector<f64> {
    let mut b = DVector::zeros(2 * modes + 1);
    b[0] = 1.0;
    let (s1, c1) = (2.0 * PI * phi).sin_cos();
    let (mut s, mut c) = (s1, c1);
    for k in 1..=modes {
        b[2 * k - 1] = c;
        b[2 * k] = s;
        let next_c = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = next_c;
    }
    b
}

/// Interpolates vector-valued nodal data `values[j]` at angle `phi`.
pub fn evaluate_on_torus(ops: &FourierOps, values: &[DVector<f64>], phi: f64) -> Result<DVector<f64>> {
    if values.len() != ops.size() {
        return Err(Error::DimensionMismatch { what: "nodal values", expected: ops.size(), found: values.len() });
    }
    let w = ops.interpolation_weights(phi);
    let mut out = DVector::zeros(values[0].len());
    for (wj, v) in w.iter().zip(values) {
        out.axpy(*wj, v, 1.0);
    }
    Ok(out)
}
