//! Sample statistics of section samples, binned by a section coordinate.

#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::section::SectionSample;

/// Coordinate used to bin samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinBy {
    Psi,
    Tau,
}

/// Per-bin statistics of the eigen-projections; empty bins hold count 0 and NaN entries.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedStats {
    pub by: BinBy,
    /// `bins + 1` edges on `[0, 1]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `mean[b][i]` of projection `i`.
    pub mean: Vec<Vec<f64>>,
    /// Unbiased sample standard deviation; NaN below two samples.
    pub std: Vec<Vec<f64>>,
    /// Square root of the mean predicted variance.
    pub predicted_std: Vec<Vec<f64>>,
}

impl BinnedStats {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Bin centres.
    pub fn centres(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    /// Ratios `std / predicted_std` of component `i` over bins with at least `min_count` samples.
    pub fn ratios(&self, component: usize, min_count: usize) -> Vec<f64> {
        (0..self.bins())
            .filter(|&b| self.counts[b] >= min_count.max(2))
            .map(|b| self.std[b][component] / self.predicted_std[b][component])
            .collect()
    }
}

/// Bins `samples` into `bins` equal bins of `ψ` or `τ`.
pub fn binned_stats(samples: &[SectionSample], bins: usize, by: BinBy) -> Result<BinnedStats> {
    if bins == 0 {
        return Err(Error::InvalidArgument("at least one bin is required".into()));
    }
    let width = samples.first().map_or(0, |s| s.projections.len());
    if let Some(s) = samples.iter().find(|s| s.projections.len() != width || s.predicted_var.len() != width) {
        return Err(Error::DimensionMismatch { what: "sample projections", expected: width, found: s.projections.len() });
    }
    let mut counts = vec![0usize; bins];
    let mut sum = vec![vec![0.0; width]; bins];
    let mut predicted = vec![vec![0.0; width]; bins];
    let index = |s: &SectionSample| {
        let v = match by {
            BinBy::Psi => s.coords.psi,
            BinBy::Tau => s.coords.tau,
        };
        ((v - v.floor()) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize
    };
    for s in samples {
        let b = index(s);
        counts[b] += 1;
        for i in 0..width {
            sum[b][i] += s.projections[i];
            predicted[b][i] += s.predicted_var[i];
        }
    }
    let mean: Vec<Vec<f64>> = (0..bins)
        .map(|b| sum[b].iter().map(|v| if counts[b] > 0 { v / counts[b] as f64 } else { f64::NAN }).collect())
        .collect();
    // Two-pass variance around the bin mean.
    let mut squares = vec![vec![0.0; width]; bins];
    for s in samples {
        let b = index(s);
        for i in 0..width {
            let d = s.projections[i] - mean[b][i];
            squares[b][i] += d * d;
        }
    }
    let std = (0..bins)
        .map(|b| {
            squares[b]
                .iter()
                .map(|v| if counts[b] > 1 { (v / (counts[b] - 1) as f64).sqrt() } else { f64::NAN })
                .collect()
        })
        .collect();
    let predicted_std = (0..bins)
        .map(|b| {
            predicted[b]
                .iter()
                .map(|v| if counts[b] > 0 { (v / counts[b] as f64).sqrt() } else { f64::NAN })
                .collect()
        })
        .collect();
    let edges = (0..=bins).map(|b| b as f64 / bins as f64).collect();
    Ok(BinnedStats { by, edges, counts, mean, std, predicted_std })
}

/// Unbiased covariance of the deviations `x_tr`.
pub fn empirical_covariance<'a>(samples: impl IntoIterator<Item = &'a SectionSample>) -> Result<DMatrix<f64>> {
    let samples: Vec<&SectionSample> = samples.into_iter().collect();
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("at least two samples are required".into()));
    }
    let n = samples[0].x_tr.len();
    let mut mean = vec![0.0; n];
    for s in &samples {
        if s.x_tr.len() != n {
            return Err(Error::DimensionMismatch { what: "sample deviation", expected: n, found: s.x_tr.len() });
        }
        for (m, v) in mean.iter_mut().zip(&s.x_tr) {
            *m += v / samples.len() as f64;
        }
    }
    let mut c = DMatrix::zeros(n, n);
    for s in &samples {
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] += (s.x_tr[i] - mean[i]) * (s.x_tr[j] - mean[j]);
            }
        }
    }
    Ok(c / (samples.len() - 1) as f64)
}

/// `‖a - b‖_F / ‖b‖_F`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::section::SectionCoords;
    use proptest::prelude::*;

    fn sample(psi: f64, tau: f64, p: f64) -> SectionSample {
        SectionSample {
            trajectory: 0,
            step: 0,
            x: vec![p, 0.0],
            coords: SectionCoords { psi, tau },
            x_tr: vec![p, 0.0],
            projections: vec![p],
            predicted_var: vec![4.0],
            residual: 0.0,
        }
    }

    #[test]
    fn known_bin_statistics() {
        let s = [sample(0.0, 0.1, 1.0), sample(0.0, 0.2, 3.0), sample(0.0, 0.9, 5.0)];
        let st = binned_stats(&s, 2, BinBy::Tau).unwrap();
        assert_eq!(st.counts, vec![2, 1]);
        assert_eq!(st.mean[0][0], 2.0);
        assert!((st.std[0][0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(st.std[1][0].is_nan());
        assert_eq!(st.predicted_std[0][0], 2.0);
        assert_eq!(st.ratios(0, 2).len(), 1);
        let empty = binned_stats(&s, 4, BinBy::Psi).unwrap();
        assert_eq!(empty.counts, vec![3, 0, 0, 0]);
        assert!(empty.mean[1][0].is_nan());
    }

    #[test]
    fn covariance_of_two_points() {
        let s = [sample(0.0, 0.0, 1.0), sample(0.0, 0.0, -1.0)];
        let c = empirical_covariance(&s).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        assert!(empirical_covariance(&s[..1]).is_err());
    }

    proptest! {
        #[test]
        fn counts_cover_every_sample(
            points in prop::collection::vec((0.0f64..1.0, -5.0f64..5.0), 0..200),
            bins in 1usize..50,
        ) {
            let s: Vec<_> = points.iter().map(|&(t, p)| sample(0.0, t, p)).collect();
            let st = binned_stats(&s, bins, BinBy::Tau).unwrap();
            prop_assert_eq!(st.total(), s.len());
            for b in 0..bins {
                if st.counts[b] > 1 {
                    prop_assert!(st.std[b][0] >= 0.0);
                    prop_assert!(st.mean[b][0].abs() <= 5.0);
                }
            }
        }

        #[test]
        fn covariance_is_symmetric_psd(points in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..60)) {
            let s: Vec<_> = points
                .iter()
                .map(|&(a, b)| SectionSample { x_tr: vec![a, b], ..sample(0.0, 0.0, a) })
                .collect();
            let c = empirical_covariance(&s).unwrap();
            prop_assert!((&c - c.transpose()).amax() < 1e-12);
            let (vals, _) = crate::linalg::sorted_symmetric_eigen(&c);
            prop_assert!(vals[1] > -1e-12);
        }
    }
}
