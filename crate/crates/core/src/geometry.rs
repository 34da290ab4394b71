//! Sparse linear array constructions.
//!
//! Positions are dimensionless non-negative integers in units of d = λ/2;
//! the physical wavelength never enters this layer. The IMISC family is
//! produced from closed-form rules; nested and extended-coprime layouts are
//! provided as comparison baselines.

use serde::Serialize;

use crate::error::{Error, Result};

/// A linear array given by its (strictly increasing) sensor positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArrayGeometry {
    label: String,
    positions: Vec<u32>,
    /// Maximum inter-element spacing parameter M (IMISC construction only).
    #[serde(skip_serializing_if = "Option::is_none")]
    max_ies: Option<u32>,
    /// Partition of the positions into the six IMISC sub-ULAs, in order.
    #[serde(skip_serializing_if = "Option::is_none")]
    sub_ulas: Option<[Vec<u32>; 6]>,
}

impl ArrayGeometry {
    /// Builds a geometry from explicit positions, validating that they are
    /// strictly increasing.
    pub fn from_positions(label: impl Into<String>, positions: Vec<u32>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("empty position set".into()));
        }
        if !positions.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "positions must be strictly increasing".into(),
            ));
        }
        Ok(Self { label: label.into(), positions, max_ies: None, sub_ulas: None })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn positions(&self) -> &[u32] {
        &self.positions
    }

    pub fn sensor_count(&self) -> usize {
        self.positions.len()
    }

    /// Largest position minus smallest (the array length in units of d).
    pub fn aperture(&self) -> u32 {
        self.positions[self.positions.len() - 1] - self.positions[0]
    }

    /// Consecutive differences of the position list (Q−1 entries).
    pub fn ies(&self) -> Vec<u32> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// The IMISC maximum-spacing parameter M, when this geometry was built by
    /// the IMISC rule.
    pub fn max_ies(&self) -> Option<u32> {
        self.max_ies
    }

    /// The six IMISC sub-ULAs, when this geometry was built by the IMISC rule.
    pub fn sub_ulas(&self) -> Option<&[Vec<u32>; 6]> {
        self.sub_ulas.as_ref()
    }
}

/// Maximum inter-element spacing M = 4⌊(Q+2)/6⌋ of the IMISC construction.
///
/// Defined for Q ≥ 10; always a positive multiple of 4 (and ≥ 8).
pub fn max_ies(q: u32) -> Result<u32> {
    if q < 10 {
        return Err(Error::SensorCount {
            label: "imisc",
            given: q as i64,
            constraint: "Q >= 10",
        });
    }
    Ok(4 * ((q + 2) / 6))
}

/// The IMISC inter-element spacing sequence for Q sensors (Q−1 entries).
///
/// Layout, with M = `max_ies(Q)` (blocks with a zero repeat count are empty):
/// (M/4−1)×2, 1, 1, M/2−2, (M/4−2)×(M/2−1), (Q−M)×M, M/2+1,
/// (M/4−2)×(M/2+1), 2, (M/4−1)×2.
pub fn imisc_ies(q: u32) -> Result<Vec<u32>> {
    let m = max_ies(q)?;
    let rep = (m / 4 - 1) as usize;
    let rep_inner = (m / 4).saturating_sub(2) as usize;
    let mut ies = Vec::with_capacity(q as usize - 1);
    ies.extend(std::iter::repeat(2).take(rep));
    ies.push(1);
    ies.push(1);
    ies.push(m / 2 - 2);
    ies.extend(std::iter::repeat(m / 2 - 1).take(rep_inner));
    ies.extend(std::iter::repeat(m).take((q - m) as usize));
    ies.push(m / 2 + 1);
    ies.extend(std::iter::repeat(m / 2 + 1).take(rep_inner));
    ies.push(2);
    ies.extend(std::iter::repeat(2).take(rep));
    debug_assert_eq!(ies.len(), q as usize - 1);
    Ok(ies)
}

/// Inclusive arithmetic range `{start, start+step, …, end}` (may be a single
/// element when start == end).
fn arith_range(start: i64, end: i64, step: i64) -> Vec<u32> {
    debug_assert!(step > 0 && start <= end && (end - start) % step == 0);
    (0..=(end - start) / step)
        .map(|k| (start + k * step) as u32)
        .collect()
}

/// The six sub-ULAs that make up the IMISC array for Q sensors, in position
/// order. Their concatenation is the full position set.
pub fn imisc_sub_ulas(q: u32) -> Result<[Vec<u32>; 6]> {
    let m = max_ies(q)? as i64;
    let q = q as i64;
    let ula1 = arith_range(0, m / 2 - 2, 2);
    let ula2 = vec![(m / 2 - 1) as u32, (m / 2) as u32];
    let ula3 = arith_range(m - 2, m * m / 8 - m / 4, m / 2 - 1);
    let ula4 = arith_range(m * m / 8 + 3 * m / 4, m * q - 7 * m * m / 8 - m / 4, m);
    let ula5 = arith_range(
        m * q - 7 * m * m / 8 + m / 4 + 1,
        m * q - 3 * m * m / 4 - m / 2 - 1,
        m / 2 + 1,
    );
    let ula6 = arith_range(m * q - 3 * m * m / 4 - m / 2 + 1, m * q - 3 * m * m / 4 - 1, 2);
    Ok([ula1, ula2, ula3, ula4, ula5, ula6])
}

/// IMISC array with Q sensors (Q ≥ 10).
///
/// Built as the ordered union of six sub-ULAs; equivalently, the running sum
/// of `imisc_ies(Q)`. The aperture is MQ − 3M²/4 − 1.
pub fn imisc_geometry(q: u32) -> Result<ArrayGeometry> {
    let sub_ulas = imisc_sub_ulas(q)?;
    let positions: Vec<u32> = sub_ulas.iter().flatten().copied().collect();
    debug_assert_eq!(positions.len(), q as usize);
    debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
    Ok(ArrayGeometry {
        label: "imisc".into(),
        positions,
        max_ies: Some(max_ies(q)?),
        sub_ulas: Some(sub_ulas),
    })
}

/// Two-level nested array: dense ULA of n1 sensors followed by a sparse
/// level at multiples of (n1+1), shifted so the first sensor sits at 0.
pub fn nested_geometry(n1: u32, n2: u32) -> Result<ArrayGeometry> {
    if n1 < 1 || n2 < 1 {
        return Err(Error::InvalidParameter(format!(
            "nested levels must be positive, got ({n1}, {n2})"
        )));
    }
    let mut positions: Vec<u32> = (0..n1).collect();
    positions.extend((1..=n2).map(|k| k * (n1 + 1) - 1));
    let mut g = ArrayGeometry::from_positions("nested", positions)?;
    debug_assert_eq!(g.sensor_count(), (n1 + n2) as usize);
    g.max_ies = None;
    Ok(g)
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Extended coprime array {0, p, 2p, …, (2q−1)p} ∪ {q, 2q, …, (p−1)q} for a
/// coprime pair p < q; sensor count 2q + p − 1.
pub fn coprime_geometry(p: u32, q: u32) -> Result<ArrayGeometry> {
    if p < 1 || p >= q || gcd(p, q) != 1 {
        return Err(Error::InvalidParameter(format!(
            "coprime pair requires 1 <= p < q with gcd(p, q) = 1, got ({p}, {q})"
        )));
    }
    let mut positions: Vec<u32> = (0..2 * q).map(|i| i * p).collect();
    positions.extend((1..p).map(|j| j * q));
    positions.sort_unstable();
    positions.dedup();
    let g = ArrayGeometry::from_positions("coprime", positions)?;
    debug_assert_eq!(g.sensor_count(), (2 * q + p - 1) as usize);
    Ok(g)
}

/// The MISC baseline cannot be materialized as a position set: its published
/// degrees-of-freedom and weight values are mutually inconsistent with every
/// spacing arrangement (the weight constraints force a spacing multiset whose
/// aperture falls short of the claimed consecutive segment, and exhaustive
/// enumeration of the boundary case finds no arrangement). Its closed-form
/// uDOF and weight values remain available via
/// [`crate::coarray::misc_udof_closed_form`] and
/// [`crate::coarray::misc_weights_closed_form`]; comparison sweeps fall back
/// to those closed forms.
pub fn misc_geometry(_q: u32) -> Result<ArrayGeometry> {
    Err(Error::UnsupportedConstruction {
        label: "misc",
        reason: "no position set is consistent with the published uDOF and weight \
                 values; use the closed forms for comparisons",
    })
}
