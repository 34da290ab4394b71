//! Subspace direction finding on the smoothed coarray covariance: noise-
//! subspace pseudo-spectrum, grid scan, peak extraction, and RMSE scoring.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominator floor that keeps the pseudo-spectrum finite when a steering
/// vector is numerically orthogonal to the noise subspace.
const SPECTRUM_FLOOR: f64 = 1e-12;

/// Uniform scan grid in degrees, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MusicGrid {
    pub min_deg: f64,
    pub max_deg: f64,
    pub step_deg: f64,
}

impl Default for MusicGrid {
    fn default() -> Self {
        Self { min_deg: -60.0, max_deg: 60.0, step_deg: 0.02 }
    }
}

impl MusicGrid {
    pub fn angles(&self) -> Vec<f64> {
        let n = ((self.max_deg - self.min_deg) / self.step_deg).round() as usize;
        (0..=n).map(|k| self.min_deg + k as f64 * self.step_deg).collect()
    }
}

/// Output of one MUSIC scan.
#[derive(Debug, Clone)]
pub struct MusicResult {
    pub grid_deg: Vec<f64>,
    pub spectrum: Vec<f64>,
    /// Angles of the strongest local maxima, sorted ascending (at most R).
    pub estimates_deg: Vec<f64>,
    /// Total number of local maxima in the spectrum.
    pub peaks_found: usize,
    /// True when fewer than R local maxima exist; such a trial is excluded
    /// from RMSE aggregation and counted separately.
    pub failed: bool,
}

/// Coarray (virtual ULA) steering vector of length L+1: entries e^{jπ·m·sin φ}
/// for m = 0..L.
pub fn coarray_steering(len: usize, angle_deg: f64) -> DVector<Complex64> {
    let s = angle_deg.to_radians().sin();
    DVector::from_iterator(
        len,
        (0..len).map(|m| Complex64::from_polar(1.0, std::f64::consts::PI * m as f64 * s)),
    )
}

/// MUSIC scan over the smoothed coarray covariance.
///
/// Eigendecomposes the Hermitian input, takes the eigenvectors of the
/// L+1−R smallest eigenvalues as the noise subspace E_n, and evaluates
/// P(φ) = 1 / ‖E_nᴴ a(φ)‖² on the grid. Estimates are the R largest local
/// maxima (grid endpoints included), sorted ascending.
pub fn music_estimate(
    rss: &DMatrix<Complex64>,
    r_sources: usize,
    grid: &MusicGrid,
) -> Result<MusicResult> {
    let n = rss.nrows();
    if n != rss.ncols() || n == 0 {
        return Err(Error::Estimation("covariance must be square and non-empty".into()));
    }
    let l = n - 1;
    if r_sources == 0 || r_sources > l {
        return Err(Error::Estimation(format!(
            "too many sources for coarray aperture (R = {r_sources}, L = {l})"
        )));
    }

    let eig = rss.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut noise = DMatrix::zeros(n, n - r_sources);
    for (c, &idx) in order[..n - r_sources].iter().enumerate() {
        noise.set_column(c, &eig.eigenvectors.column(idx));
    }
    let noise_h = noise.adjoint();

    let grid_deg = grid.angles();
    let spectrum: Vec<f64> = grid_deg
        .iter()
        .map(|&a| {
            let u = coarray_steering(n, a);
            let denom = (&noise_h * u).norm_squared().max(SPECTRUM_FLOOR);
            1.0 / denom
        })
        .collect();

    let peaks = local_maxima(&spectrum);
    let mut best: Vec<usize> = peaks.clone();
    best.sort_by(|&a, &b| spectrum[b].total_cmp(&spectrum[a]));
    best.truncate(r_sources);
    let mut estimates_deg: Vec<f64> = best.into_iter().map(|i| grid_deg[i]).collect();
    estimates_deg.sort_by(f64::total_cmp);

    Ok(MusicResult {
        failed: peaks.len() < r_sources,
        peaks_found: peaks.len(),
        grid_deg,
        spectrum,
        estimates_deg,
    })
}

/// Indices of local maxima; plateaus count once (their first sample), and
/// the grid endpoints are eligible.
fn local_maxima(s: &[f64]) -> Vec<usize> {
    (0..s.len())
        .filter(|&i| {
            let left_ok = i == 0 || s[i] > s[i - 1];
            let right_ok = i + 1 == s.len() || s[i] >= s[i + 1];
            left_ok && right_ok
        })
        .collect()
}

/// Root-mean-square error over trials with order-statistic pairing: both the
/// truth and each trial's estimates are sorted ascending and paired by rank.
/// Every trial must supply exactly `truth.len()` estimates.
pub fn rmse(trials: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::Estimation("RMSE undefined: zero successful trials".into()));
    }
    let mut t = truth.to_vec();
    t.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    for est in trials {
        if est.len() != t.len() {
            return Err(Error::Estimation(format!(
                "trial has {} estimates for {} sources",
                est.len(),
                t.len()
            )));
        }
        let mut e = est.clone();
        e.sort_by(f64::total_cmp);
        acc += e.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok((acc / (trials.len() * t.len()) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarray::{difference_coarray, CouplingModel};
    use crate::estimation::{analytic_covariance, smoothed_coarray_covariance, SourceScene};
    use crate::geometry::imisc_geometry;
    use approx::assert_relative_eq;

    #[test]
    fn grid_angles_inclusive() {
        let g = MusicGrid::default();
        let a = g.angles();
        assert_eq!(a.len(), 6001);
        assert_relative_eq!(a[0], -60.0);
        assert_relative_eq!(a[6000], 60.0);
        assert_relative_eq!(a[1] - a[0], 0.02, epsilon = 1e-12);
    }

    #[test]
    fn local_maxima_plateaus_and_endpoints() {
        assert_eq!(local_maxima(&[3.0, 1.0, 2.0, 2.0, 1.0, 5.0]), vec![0, 2, 5]);
        assert_eq!(local_maxima(&[1.0, 2.0, 1.0]), vec![1]);
    }

    #[test]
    fn single_noiseless_source_hits_grid_point_exactly() {
        let geom = imisc_geometry(10).unwrap();
        let profile = difference_coarray(&geom);
        let scene = SourceScene::new(vec![12.5], vec![1.0], 0.0).unwrap();
        let rx = analytic_covariance(&geom, &scene, &CouplingModel::none()).unwrap();
        let rss = smoothed_coarray_covariance(&rx, &profile, &geom).unwrap();
        let res = music_estimate(&rss, 1, &MusicGrid::default()).unwrap();
        assert!(!res.failed);
        assert_relative_eq!(res.estimates_deg[0], 12.5, epsilon = 1e-9);
    }

    #[test]
    fn too_many_sources_is_rejected() {
        let geom = imisc_geometry(10).unwrap();
        let profile = difference_coarray(&geom);
        let scene = SourceScene::equal_power(vec![0.0], 0.0).unwrap();
        let rx = analytic_covariance(&geom, &scene, &CouplingModel::none()).unwrap();
        let rss = smoothed_coarray_covariance(&rx, &profile, &geom).unwrap();
        // L = 29 for Q=10: 30 sources exceed the coarray aperture
        assert!(music_estimate(&rss, 30, &MusicGrid::default()).is_err());
    }

    #[test]
    fn spectrum_is_positive_and_estimates_lie_on_grid() {
        let geom = imisc_geometry(10).unwrap();
        let profile = difference_coarray(&geom);
        let scene = SourceScene::equal_power(vec![-30.0, 10.0], 0.0).unwrap();
        let rx = analytic_covariance(&geom, &scene, &CouplingModel::none()).unwrap();
        let rss = smoothed_coarray_covariance(&rx, &profile, &geom).unwrap();
        let res = music_estimate(&rss, 2, &MusicGrid::default()).unwrap();
        assert!(res.spectrum.iter().all(|&v| v > 0.0));
        for e in &res.estimates_deg {
            assert!(res.grid_deg.iter().any(|g| (g - e).abs() < 1e-12));
        }
    }

    #[test]
    fn rmse_examples() {
        assert_relative_eq!(rmse(&[vec![1.0, 2.0]], &[1.0, 2.0]).unwrap(), 0.0);
        assert_relative_eq!(rmse(&[vec![10.1]], &[10.0]).unwrap(), 0.1, max_relative = 1e-12);
        let two = rmse(&[vec![0.3], vec![-0.4]], &[0.0]).unwrap();
        assert_relative_eq!(two, ((0.09 + 0.16) / 2.0f64).sqrt(), max_relative = 1e-12);
        // pairing is order-statistic: permuted estimates score identically
        let a = rmse(&[vec![20.0, -10.1]], &[-10.0, 20.0]).unwrap();
        let b = rmse(&[vec![-10.1, 20.0]], &[-10.0, 20.0]).unwrap();
        assert_relative_eq!(a, b);
        assert!(rmse(&[], &[0.0]).is_err());
        assert!(rmse(&[vec![1.0]], &[1.0, 2.0]).is_err());
    }
}
