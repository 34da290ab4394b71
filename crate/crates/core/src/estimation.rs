//! Snapshot synthesis and the coarray covariance pipeline: steering vectors,
//! mutual-coupling application, sample/analytic covariance, redundancy-
//! averaged lag vectors, and spatial smoothing.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::coarray::{coupling_matrix, CoarrayProfile, CouplingModel};
use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;

/// A far-field narrowband source scene: directions, per-source powers, and
/// the noise power.
#[derive(Debug, Clone)]
pub struct SourceScene {
    angles_deg: Vec<f64>,
    powers: Vec<f64>,
    noise_power: f64,
}

impl SourceScene {
    /// Validates that angles are strictly increasing within (−90°, 90°) and
    /// that all source powers are positive (noise power may be zero for
    /// noiseless oracles).
    pub fn new(angles_deg: Vec<f64>, powers: Vec<f64>, noise_power: f64) -> Result<Self> {
        if angles_deg.is_empty() || angles_deg.len() != powers.len() {
            return Err(Error::InvalidParameter(
                "scene needs one positive power per source angle".into(),
            ));
        }
        if !angles_deg.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter("angles must be strictly increasing".into()));
        }
        if angles_deg.iter().any(|a| a.abs() >= 90.0) {
            return Err(Error::InvalidParameter("angles must lie in (-90, 90) degrees".into()));
        }
        if powers.iter().any(|&p| p <= 0.0) || noise_power < 0.0 {
            return Err(Error::InvalidParameter("powers must be positive".into()));
        }
        Ok(Self { angles_deg, powers, noise_power })
    }

    /// Equal-power scene with unit noise power; source power is set from the
    /// signal-to-noise ratio in dB.
    pub fn equal_power(angles_deg: Vec<f64>, snr_db: f64) -> Result<Self> {
        let p = 10f64.powf(snr_db / 10.0);
        let powers = vec![p; angles_deg.len()];
        Self::new(angles_deg, powers, 1.0)
    }

    pub fn source_count(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }
}

/// Physical-array steering vector with entries e^{jπ·p·sin φ} over the sensor
/// positions p (half-wavelength units).
pub fn steering_vector(geom: &ArrayGeometry, angle_deg: f64) -> Result<DVector<Complex64>> {
    if angle_deg.abs() >= 90.0 {
        return Err(Error::InvalidParameter(format!(
            "steering angle must lie in (-90, 90) degrees, got {angle_deg}"
        )));
    }
    let s = angle_deg.to_radians().sin();
    Ok(DVector::from_iterator(
        geom.sensor_count(),
        geom.positions()
            .iter()
            .map(|&p| Complex64::from_polar(1.0, std::f64::consts::PI * p as f64 * s)),
    ))
}

/// Q×R matrix whose columns are the steering vectors of the scene angles.
pub fn steering_matrix(geom: &ArrayGeometry, angles_deg: &[f64]) -> Result<DMatrix<Complex64>> {
    let mut v = DMatrix::zeros(geom.sensor_count(), angles_deg.len());
    for (c, &a) in angles_deg.iter().enumerate() {
        v.set_column(c, &steering_vector(geom, a)?);
    }
    Ok(v)
}

/// One batch of array snapshots plus the seed that generated it.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    /// Q×T complex snapshot matrix.
    pub data: DMatrix<Complex64>,
    pub seed: u64,
}

fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    // circular: each component carries half the variance
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws T snapshots x_t = C·V·s_t + n_t with independent circular complex
/// Gaussian sources and noise. Deterministic in `seed`.
pub fn synthesize_snapshots(
    geom: &ArrayGeometry,
    scene: &SourceScene,
    coupling: &CouplingModel,
    t: usize,
    seed: u64,
) -> Result<SnapshotSet> {
    if t == 0 {
        return Err(Error::InvalidParameter("snapshot count must be at least 1".into()));
    }
    let q = geom.sensor_count();
    let r = scene.source_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut signals = DMatrix::zeros(r, t);
    for col in 0..t {
        for row in 0..r {
            signals[(row, col)] = complex_gaussian(&mut rng, scene.powers()[row]);
        }
    }
    let mut data = coupling_matrix(geom, coupling) * steering_matrix(geom, scene.angles_deg())? * signals;
    if scene.noise_power() > 0.0 {
        for col in 0..t {
            for row in 0..q {
                data[(row, col)] += complex_gaussian(&mut rng, scene.noise_power());
            }
        }
    }
    Ok(SnapshotSet { data, seed })
}

/// Sample covariance (1/T)·X·Xᴴ, symmetrized to be exactly Hermitian.
pub fn sample_covariance(snaps: &SnapshotSet) -> DMatrix<Complex64> {
    let t = snaps.data.ncols();
    let r = &snaps.data * snaps.data.adjoint() / Complex64::new(t as f64, 0.0);
    (&r + r.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Exact ensemble covariance C·V·diag(p)·Vᴴ·Cᴴ + σ_n²·I (no sampling).
pub fn analytic_covariance(
    geom: &ArrayGeometry,
    scene: &SourceScene,
    coupling: &CouplingModel,
) -> Result<DMatrix<Complex64>> {
    let cv = coupling_matrix(geom, coupling) * steering_matrix(geom, scene.angles_deg())?;
    let p = DMatrix::from_diagonal(&DVector::from_iterator(
        scene.source_count(),
        scene.powers().iter().map(|&x| Complex64::new(x, 0.0)),
    ));
    let mut r = &cv * p * cv.adjoint();
    for i in 0..geom.sensor_count() {
        r[(i, i)] += scene.noise_power();
    }
    Ok((&r + r.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Averages covariance entries over every sensor pair producing the same lag,
/// yielding a conjugate-symmetric vector over lags [−L, L] with
/// L = `profile.consecutive_bound` (index i holds lag i − L).
pub fn lag_average(
    rx: &DMatrix<Complex64>,
    profile: &CoarrayProfile,
    geom: &ArrayGeometry,
) -> Result<Vec<Complex64>> {
    let pos = geom.positions();
    let q = pos.len();
    if rx.nrows() != q || rx.ncols() != q {
        return Err(Error::Estimation(format!(
            "covariance is {}x{} but the array has {q} sensors",
            rx.nrows(),
            rx.ncols()
        )));
    }
    let l = profile.consecutive_bound as i64;
    let mut sums = vec![Complex64::new(0.0, 0.0); l as usize + 1];
    let mut counts = vec![0u64; l as usize + 1];
    for a in 0..q {
        for b in 0..q {
            let lag = pos[a] as i64 - pos[b] as i64;
            if (0..=l).contains(&lag) {
                sums[lag as usize] += rx[(a, b)];
                counts[lag as usize] += 1;
            }
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * l as usize + 1];
    for n in 0..=l as usize {
        if counts[n] == 0 {
            return Err(Error::Estimation(format!(
                "lag {n} inside the consecutive segment has no sensor pair"
            )));
        }
        debug_assert_eq!(counts[n], profile.weight(n as i64));
        let avg = sums[n] / counts[n] as f64;
        out[l as usize + n] = avg;
        out[l as usize - n] = avg.conj();
    }
    Ok(out)
}

/// Spatially smoothed coarray covariance: for a conjugate-symmetric lag
/// vector over [−L, L], averages the L+1 overlapping subvectors
/// z_k = lags [k−L, k] into R_ss = (1/(L+1))·Σ z_k·z_kᴴ ((L+1)×(L+1),
/// Hermitian positive semidefinite).
pub fn spatial_smoothing(lag_vec: &[Complex64]) -> Result<DMatrix<Complex64>> {
    if lag_vec.len() % 2 == 0 || lag_vec.is_empty() {
        return Err(Error::Estimation(format!(
            "lag vector must have odd length 2L+1, got {}",
            lag_vec.len()
        )));
    }
    let n = lag_vec.len() / 2 + 1; // L+1
    let scale: f64 = lag_vec.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    for i in 0..lag_vec.len() {
        let mirrored = lag_vec[lag_vec.len() - 1 - i].conj();
        if (lag_vec[i] - mirrored).norm() > 1e-9 * scale {
            return Err(Error::Estimation(
                "lag vector is not conjugate-symmetric".into(),
            ));
        }
    }
    let mut rss = DMatrix::zeros(n, n);
    for k in 0..n {
        let z = DVector::from_column_slice(&lag_vec[k..k + n]);
        rss += &z * z.adjoint();
    }
    Ok(rss / Complex64::new(n as f64, 0.0))
}

/// Convenience runner: covariance → lag averaging → spatial smoothing.
pub fn smoothed_coarray_covariance(
    rx: &DMatrix<Complex64>,
    profile: &CoarrayProfile,
    geom: &ArrayGeometry,
) -> Result<DMatrix<Complex64>> {
    spatial_smoothing(&lag_average(rx, profile, geom)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarray::difference_coarray;
    use crate::geometry::{imisc_geometry, ArrayGeometry};
    use approx::assert_relative_eq;

    fn toy_geometry() -> ArrayGeometry {
        ArrayGeometry::from_positions("custom", vec![0, 1, 2, 5]).unwrap()
    }

    #[test]
    fn steering_basics() {
        let g = toy_geometry();
        let v0 = steering_vector(&g, 0.0).unwrap();
        assert!(v0.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert!(steering_vector(&g, 90.0).is_err());
        assert!(steering_vector(&g, -95.0).is_err());

        let v = steering_vector(&g, 37.3).unwrap();
        let vm = steering_vector(&g, -37.3).unwrap();
        for i in 0..4 {
            assert_relative_eq!(v[i].re, vm[i].re, max_relative = 1e-12);
            assert_relative_eq!(v[i].im, -vm[i].im, max_relative = 1e-12);
        }
    }

    #[test]
    fn snapshots_are_deterministic_in_seed() {
        let g = toy_geometry();
        let scene = SourceScene::equal_power(vec![-10.0, 25.0], 0.0).unwrap();
        let a = synthesize_snapshots(&g, &scene, &CouplingModel::none(), 16, 7).unwrap();
        let b = synthesize_snapshots(&g, &scene, &CouplingModel::none(), 16, 7).unwrap();
        let c = synthesize_snapshots(&g, &scene, &CouplingModel::none(), 16, 8).unwrap();
        assert_eq!(a.data, b.data);
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn noiseless_single_source_is_rank_one() {
        let g = toy_geometry();
        let scene = SourceScene::new(vec![14.0], vec![2.0], 0.0).unwrap();
        let snaps = synthesize_snapshots(&g, &scene, &CouplingModel::none(), 1, 3).unwrap();
        let v = steering_vector(&g, 14.0).unwrap();
        let ratio = snaps.data[(0, 0)] / v[0];
        for k in 1..4 {
            assert!((snaps.data[(k, 0)] / v[k] - ratio).norm() < 1e-12);
        }
    }

    #[test]
    fn sample_covariance_properties() {
        let g = toy_geometry();
        let scene = SourceScene::equal_power(vec![0.0], 10.0).unwrap();
        let snaps = synthesize_snapshots(&g, &scene, &CouplingModel::none(), 50, 11).unwrap();
        let r = sample_covariance(&snaps);
        assert_eq!(r, r.adjoint());
        let trace: Complex64 = (0..4).map(|i| r[(i, i)]).sum();
        let energy: f64 = snaps.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / 50.0;
        assert_relative_eq!(trace.re, energy, max_relative = 1e-12);

        let single = synthesize_snapshots(&g, &scene, &CouplingModel::none(), 1, 11).unwrap();
        let r1 = sample_covariance(&single);
        let x = single.data.column(0);
        let outer = &x * x.adjoint();
        assert!((&r1 - &outer).norm() < 1e-12);
    }

    #[test]
    fn sample_covariance_converges_to_analytic() {
        let g = toy_geometry();
        let scene = SourceScene::equal_power(vec![-20.0, 30.0], 5.0).unwrap();
        let t = 200_000;
        let snaps = synthesize_snapshots(&g, &scene, &CouplingModel::none(), t, 99).unwrap();
        let sample = sample_covariance(&snaps);
        let exact = analytic_covariance(&g, &scene, &CouplingModel::none()).unwrap();
        let rel = (&sample - &exact).norm() / exact.norm();
        assert!(rel < 0.02, "relative error {rel}");
    }

    #[test]
    fn lag_average_identity_covariance() {
        let g = toy_geometry();
        let profile = difference_coarray(&g);
        let rx = DMatrix::identity(4, 4);
        let v = lag_average(&rx, &profile, &g).unwrap();
        let l = profile.consecutive_bound as usize;
        assert_eq!(v.len(), 2 * l + 1);
        for (i, z) in v.iter().enumerate() {
            let expect = if i == l { 1.0 } else { 0.0 };
            assert_relative_eq!(z.re, expect, epsilon = 1e-15);
            assert_relative_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn lag_average_matches_analytic_line_spectrum() {
        // redundancy averaging of the exact covariance reproduces
        // Σ_i p_i e^{jπ n sin φ_i} + σ_n² δ(n) at machine precision
        let g = imisc_geometry(10).unwrap();
        let profile = difference_coarray(&g);
        let scene = SourceScene::new(vec![-31.0, 4.0, 42.0], vec![1.5, 0.7, 2.2], 0.9).unwrap();
        let rx = analytic_covariance(&g, &scene, &CouplingModel::none()).unwrap();
        let v = lag_average(&rx, &profile, &g).unwrap();
        let l = profile.consecutive_bound as i64;
        assert_eq!(v.len(), 59);
        for n in -l..=l {
            let mut expect = Complex64::new(0.0, 0.0);
            for (a, p) in scene.angles_deg().iter().zip(scene.powers()) {
                let phase = std::f64::consts::PI * n as f64 * a.to_radians().sin();
                expect += p * Complex64::from_polar(1.0, phase);
            }
            if n == 0 {
                expect += scene.noise_power();
            }
            assert!((v[(n + l) as usize] - expect).norm() < 1e-10, "lag {n}");
        }
    }

    #[test]
    fn smoothing_shape_and_delta_input() {
        let g = imisc_geometry(10).unwrap();
        let profile = difference_coarray(&g);
        let mut delta = vec![Complex64::new(0.0, 0.0); 59];
        delta[29] = Complex64::new(1.0, 0.0);
        let rss = spatial_smoothing(&delta).unwrap();
        assert_eq!(rss.shape(), (30, 30));
        let expect = DMatrix::identity(30, 30) / Complex64::new(30.0, 0.0);
        assert!((&rss - &expect).norm() < 1e-14);

        let scene = SourceScene::equal_power(vec![5.0], 0.0).unwrap();
        let rx = analytic_covariance(&g, &scene, &CouplingModel::none()).unwrap();
        let rss2 = smoothed_coarray_covariance(&rx, &profile, &g).unwrap();
        assert_eq!(rss2.shape(), (30, 30));
        assert!((&rss2 - rss2.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn smoothing_rejects_bad_input() {
        assert!(spatial_smoothing(&[Complex64::new(1.0, 0.0); 4]).is_err());
        let mut v = vec![Complex64::new(0.0, 0.0); 5];
        v[1] = Complex64::new(1.0, 0.0); // not conjugate-symmetric
        assert!(spatial_smoothing(&v).is_err());
    }

    #[test]
    fn smoothing_is_psd() {
        let g = imisc_geometry(10).unwrap();
        let profile = difference_coarray(&g);
        let scene = SourceScene::equal_power(vec![-40.0, 10.0], 5.0).unwrap();
        let snaps = synthesize_snapshots(&g, &scene, &CouplingModel::none(), 200, 5).unwrap();
        let rss =
            smoothed_coarray_covariance(&sample_covariance(&snaps), &profile, &g).unwrap();
        let eig = rss.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&e| e > -1e-10));
    }
}
