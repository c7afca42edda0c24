//! Small dense linear-algebra helpers on top of nalgebra.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivot ratio below which an LU factorization is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
        }
    }
    out
}

/// Column-major vectorization.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`] for an `rows × cols` matrix.
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v)
}

/// `(m + mᵀ)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0, |a, &s| a.max(s))
}

/// LU factorization that refuses numerically singular matrices.
pub struct Lu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Lu {
    pub fn new(m: DMatrix<f64>, context: &str) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                what: "square system",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear system"));
        }
        let lu = m.lu();
        let u = lu.u();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..u.nrows() {
            let d = u[(i, i)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if !(hi > 0.0) || lo <= SINGULAR_PIVOT_RATIO * hi {
            return Err(Error::Singular(format!(
                "{context}: pivot ratio {:e}",
                if hi > 0.0 { lo / hi } else { 0.0 }
            )));
        }
        Ok(Self { lu })
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(b).expect("checked nonsingular")
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.lu.solve(b).expect("checked nonsingular")
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.lu.try_inverse().expect("checked nonsingular")
    }
}

/// Inverse of a nonsingular square matrix.
pub fn inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    Ok(Lu::new(m.clone(), context)?.inverse())
}

/// Eigen-decomposition of a symmetric matrix sorted by descending eigenvalue.
/// Columns of the returned matrix are unit eigenvectors.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Unit vector spanning the numerical null space of `m` (smallest singular direction),
/// together with the smallest and second-smallest singular values.
pub fn null_vector(m: &DMatrix<f64>) -> (DVector<f64>, f64, f64) {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let smallest = svd.singular_values[idx[0]];
    let second = if n > 1 {
        svd.singular_values[idx[1]]
    } else {
        f64::INFINITY
    };
    let v = v_t.row(idx[0]).transpose();
    (v, smallest, second)
}

/// Orthonormal basis of the column space of `m` with numerical rank `rank`.
pub fn range_basis(m: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(m.nrows(), rank);
    for (dst, &src) in idx.iter().take(rank).enumerate() {
        out.set_column(dst, &u.column(src));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_matches_vec_identity() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let c = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.25]);
        let lhs = vec_of(&(&a * &c * a.transpose()));
        let rhs = kron(&a, &a) * vec_of(&c);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(Lu::new(m, "test"), Err(Error::Singular(_))));
    }

    #[test]
    fn sorted_eigen_is_descending() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = sorted_symmetric_eigen(&m);
        assert_eq!(vals, [3.0, 1.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }
}
