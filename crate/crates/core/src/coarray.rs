//! Difference-coarray analysis: lag sets, weight functions, consecutive-lag
//! bounds, uniform degrees of freedom (brute force and closed form), and the
//! banded mutual-coupling model with its leakage measure.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{max_ies, ArrayGeometry};

/// Exhaustively computed difference coarray of a geometry.
#[derive(Debug, Clone, Serialize)]
pub struct CoarrayProfile {
    /// Every lag p_a − p_b over ordered sensor pairs, sorted ascending
    /// (symmetric about 0).
    pub lags: Vec<i64>,
    /// Multiplicity w(n) of each lag over ordered pairs; w(0) = Q and the
    /// values sum to Q².
    pub weights: BTreeMap<i64, u64>,
    /// Largest L ≥ 0 such that every integer in [−L, L] is a lag.
    pub consecutive_bound: u32,
    /// Uniform degrees of freedom, 2L + 1.
    pub udof: u64,
}

impl CoarrayProfile {
    /// w(n), zero for lags not in the coarray.
    pub fn weight(&self, n: i64) -> u64 {
        self.weights.get(&n).copied().unwrap_or(0)
    }

    /// (w(1), w(2), w(3)) — the weights that dominate mutual coupling.
    pub fn w123(&self) -> [u64; 3] {
        [self.weight(1), self.weight(2), self.weight(3)]
    }

    /// Largest lag (equals the array aperture).
    pub fn aperture(&self) -> i64 {
        *self.lags.last().expect("coarray is never empty")
    }
}

/// Brute-force difference coarray over all ordered sensor pairs (O(Q²)).
pub fn difference_coarray(geom: &ArrayGeometry) -> CoarrayProfile {
    let pos = geom.positions();
    let mut weights: BTreeMap<i64, u64> = BTreeMap::new();
    for &a in pos {
        for &b in pos {
            *weights.entry(a as i64 - b as i64).or_insert(0) += 1;
        }
    }
    let lags: Vec<i64> = weights.keys().copied().collect();
    let mut l = 0u32;
    while weights.contains_key(&(l as i64 + 1)) {
        l += 1;
    }
    CoarrayProfile { lags, weights, consecutive_bound: l, udof: 2 * l as u64 + 1 }
}

/// Closed-form IMISC uniform degrees of freedom, 2MQ − 3M²/2 − M + 3 with
/// M = `max_ies(Q)`.
pub fn imisc_udof_closed_form(q: u32) -> Result<u64> {
    let m = max_ies(q)? as i64;
    let q = q as i64;
    Ok((2 * m * q - 3 * m * m / 2 - m + 3) as u64)
}

/// Residue-class form of the IMISC uniform degrees of freedom; agrees with
/// [`imisc_udof_closed_form`] for every Q ≥ 10 (all branches are exactly
/// integral when their residue condition holds).
pub fn imisc_udof_residue_form(q: u32) -> Result<u64> {
    if q < 10 {
        return Err(Error::SensorCount { label: "imisc", given: q as i64, constraint: "Q >= 10" });
    }
    let q = q as i64;
    let base = 2 * q * (q - 1);
    let v = match q % 6 {
        3 | 4 => base / 3 - 1,
        2 | 5 => (base + 5) / 3,
        _ => base / 3 + 3,
    };
    Ok(v as u64)
}

/// Closed-form MISC uniform degrees of freedom. The fractional constants in
/// the odd-Q branches cancel exactly once the residue condition is applied,
/// so the result is computed in integer arithmetic.
pub fn misc_udof_closed_form(q: u32) -> Result<u64> {
    if q < 8 {
        return Err(Error::SensorCount { label: "misc", given: q as i64, constraint: "Q >= 8" });
    }
    let q = q as i64;
    let v = match (q % 4, q % 2) {
        (1, _) => (q * q + 6 * q - 17) / 2,
        (_, 0) => q * q / 2 + 3 * q - 9,
        _ => (q * q + 6 * q - 21) / 2,
    };
    Ok(v as u64)
}

/// Closed-form first three IMISC weights (w(1), w(2), w(3)).
pub fn imisc_weights_closed_form(q: u32) -> Result<[u64; 3]> {
    if q < 10 {
        return Err(Error::SensorCount { label: "imisc", given: q as i64, constraint: "Q >= 10" });
    }
    Ok(if q >= 16 {
        [2, 2 * ((q as u64 + 2) / 6), 1]
    } else {
        [2, 5, 2]
    })
}

/// Closed-form first three MISC weights (w(1), w(2), w(3)).
pub fn misc_weights_closed_form(q: u32) -> Result<[u64; 3]> {
    if q < 8 {
        return Err(Error::SensorCount { label: "misc", given: q as i64, constraint: "Q >= 8" });
    }
    Ok([1, 2 * (q as u64 / 4) - 3, if q == 9 { 2 } else { 1 }])
}

/// Banded mutual-coupling model: c(0) = 1, c(i) = a1·e^{−j(i−1)·φ}/i for
/// 1 ≤ i ≤ band, zero beyond. The default phase step φ = π/8 gives
/// |c(i)/c(j)| = j/i for all i, j in band.
#[derive(Debug, Clone, Copy)]
pub struct CouplingModel {
    pub a1: Complex64,
    /// Coupling range cutoff D (in units of d): separations beyond this
    /// contribute nothing.
    pub band: u32,
    /// Phase rotation per separation step, in radians.
    pub decay_phase_step: f64,
}

impl CouplingModel {
    pub const DEFAULT_BAND: u32 = 100;

    /// Model with the standard phase law; requires |a1| < 1.
    pub fn new(a1: Complex64, band: u32) -> Result<Self> {
        if !(a1.norm() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "coupling coefficient must satisfy |a1| < 1, got |a1| = {}",
                a1.norm()
            )));
        }
        Ok(Self { a1, band, decay_phase_step: std::f64::consts::PI / 8.0 })
    }

    /// No coupling at all (identity coupling matrix).
    pub fn none() -> Self {
        Self { a1: Complex64::new(0.0, 0.0), band: Self::DEFAULT_BAND, decay_phase_step: std::f64::consts::PI / 8.0 }
    }

    /// Coupling coefficient for a sensor separation of `n` units.
    pub fn coefficient(&self, n: u32) -> Complex64 {
        if n == 0 {
            Complex64::new(1.0, 0.0)
        } else if n <= self.band {
            let phase = -(n as f64 - 1.0) * self.decay_phase_step;
            self.a1 * Complex64::from_polar(1.0, phase) / n as f64
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

/// Q×Q mutual-coupling matrix: entry (b, c) = coefficient(|p_b − p_c|).
/// Symmetric (not Hermitian in general) with all-ones diagonal.
pub fn coupling_matrix(geom: &ArrayGeometry, model: &CouplingModel) -> DMatrix<Complex64> {
    let pos = geom.positions();
    let q = pos.len();
    DMatrix::from_fn(q, q, |r, c| model.coefficient(pos[r].abs_diff(pos[c])))
}

/// Coupling leakage E = ‖A − diag(A)‖_F / ‖A‖_F of the coupling matrix A;
/// 0 for no coupling, approaching 1 as off-diagonal energy dominates.
pub fn coupling_leakage(geom: &ArrayGeometry, model: &CouplingModel) -> f64 {
    let a = coupling_matrix(geom, model);
    let mut off = 0.0;
    let mut total = 0.0;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            let e = a[(r, c)].norm_sqr();
            total += e;
            if r != c {
                off += e;
            }
        }
    }
    (off / total).sqrt()
}
