//! Closed-form reference solutions for the built-in problems.

#[allow(unused_imports)]
use num_traits::Float as _;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector};

/// Hopf normal form: unit circle traversed with period `2π`.
pub mod hopf {
    use super::*;

    pub fn gamma(t: f64) -> DVector<f64> {
        DVector::from_vec(alloc::vec![(2.0 * PI * t).cos(), (2.0 * PI * t).sin()])
    }

    pub fn fundamental(t: f64) -> DMatrix<f64> {
        let (s, c) = (2.0 * PI * t).sin_cos();
        let e = (-4.0 * PI * t).exp();
        DMatrix::from_row_slice(2, 2, &[e * c, -s, e * s, c])
    }

    pub fn adjoint(t: f64) -> DVector<f64> {
        let (s, c) = (2.0 * PI * t).sin_cos();
        DVector::from_vec(alloc::vec![-s, c])
    }

    pub fn projection(t: f64) -> DMatrix<f64> {
        let (s, c) = (2.0 * PI * t).sin_cos();
        DMatrix::from_row_slice(2, 2, &[c * c, c * s, c * s, s * s])
    }

    /// The single nonzero eigenvalue of `C(t)`.
    pub fn eigenvalue(t: f64) -> f64 {
        (5.0 - 4.0 * (4.0 * PI * t).cos() - 2.0 * (4.0 * PI * t).sin()) / 40.0
    }

    /// `C(t)`, a multiple of the radial projection.
    pub fn covariance(t: f64) -> DMatrix<f64> {
        projection(t) * eigenvalue(t)
    }

    /// `T Q(0) (∫₀ᵗ G Gᵀ) Q(0)ᵀ` restricted to its only nonzero entry.
    pub fn projected_noise_integral(t: f64) -> f64 {
        let a = 4.0 * PI * t;
        ((8.0 * PI * t).exp() * (5.0 - 4.0 * a.cos() - 2.0 * a.sin()) - 1.0) / 40.0
    }
}

/// Damped oscillator with unit-circle periodic response.
pub mod linosc {
    use super::*;

    pub fn gamma(t: f64) -> DVector<f64> {
        DVector::from_vec(alloc::vec![(2.0 * PI * t).sin(), (2.0 * PI * t).cos()])
    }

    pub fn fundamental(t: f64) -> DMatrix<f64> {
        let a = 2.0 * PI * t;
        let e = (-a).exp();
        DMatrix::from_row_slice(2, 2, &[e * (1.0 + a), e * a, -e * a, e * (1.0 - a)])
    }

    pub fn covariance(t: f64) -> DMatrix<f64> {
        let (s, c) = (4.0 * PI * t).sin_cos();
        DMatrix::from_row_slice(
            2,
            2,
            &[4.0 + c - s, -c - s, -c - s, 4.0 - 3.0 * c - s],
        ) / 32.0
    }

    /// Eigenvalues of `C(t)` in descending order.
    pub fn eigenvalues(t: f64) -> [f64; 2] {
        let (s, c) = (4.0 * PI * t).sin_cos();
        let (s2, c2) = (8.0 * PI * t).sin_cos();
        let root = (3.0 + 2.0 * c2 + s2).sqrt();
        let base = 4.0 - c - s;
        [(base + root) / 32.0, (base - root) / 32.0]
    }

    /// Modulus of both Floquet multipliers.
    pub fn multiplier_modulus() -> f64 {
        (-2.0 * PI).exp()
    }
}

/// Forced planar rotation with a circular invariant torus; `rotation = Ω`, `forcing = ω`.
pub mod radial_torus {
    use super::*;

    fn b(t: f64, forcing: f64) -> f64 {
        1.0 + forcing * forcing - (2.0 * PI * t).cos() - forcing * (2.0 * PI * t).sin()
    }

    pub fn rotation_number(rotation: f64, forcing: f64) -> f64 {
        rotation / forcing
    }

    pub fn gamma(phi: f64, t: f64, rotation: f64, forcing: f64) -> DVector<f64> {
        let rho = rotation / forcing;
        let r = (1.0 + forcing * forcing) / b(t, forcing);
        let (s, c) = (2.0 * PI * (phi + rho * t)).sin_cos();
        DVector::from_vec(alloc::vec![r * c, r * s])
    }

    pub fn fundamental(phi: f64, t: f64, rotation: f64, forcing: f64) -> DMatrix<f64> {
        let rho = rotation / forcing;
        let bt = b(t, forcing);
        let w2 = forcing * forcing;
        let e = (-2.0 * PI * t / forcing).exp();
        let (s0, c0) = (2.0 * PI * phi).sin_cos();
        let (st, ct) = (2.0 * PI * (phi + rho * t)).sin_cos();
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                e * w2 * c0 * ct + bt * s0 * st,
                e * w2 * s0 * ct - bt * c0 * st,
                e * w2 * c0 * st - bt * s0 * ct,
                e * w2 * s0 * st + bt * c0 * ct,
            ],
        );
        m * (w2 / (bt * bt))
    }

    /// `w_φ(φ) = λ_φ(φ, 0)`.
    pub fn w_phi(phi: f64, forcing: f64) -> DVector<f64> {
        let w2 = forcing * forcing;
        let k = w2 / (2.0 * PI * (1.0 + w2));
        let (s, c) = (2.0 * PI * phi).sin_cos();
        DVector::from_vec(alloc::vec![-k * s, k * c])
    }

    /// Radial projection `Q(φ, t)`.
    pub fn projection(phi: f64, t: f64, rotation: f64, forcing: f64) -> DMatrix<f64> {
        let rho = rotation / forcing;
        let (s, c) = (2.0 * PI * (phi + rho * t)).sin_cos();
        DMatrix::from_row_slice(2, 2, &[c * c, s * c, s * c, s * s])
    }

    /// `C(φ, 0)`.
    pub fn covariance0(phi: f64, rotation: f64, forcing: f64) -> DMatrix<f64> {
        let w2 = forcing * forcing;
        let (s2, c2) = (4.0 * PI * phi).sin_cos();
        let scale = (1.0 + w2).powi(4) * (1.0 + rotation * rotation - c2 - rotation * s2)
            / (4.0 * w2.powi(4) * (1.0 + rotation * rotation));
        projection(phi, 0.0, rotation, forcing) * scale
    }
}
