//! Mechanical verification of the closed-form cross-difference identities
//! behind the IMISC consecutive-coverage result.
//!
//! For each ordered pair of the six IMISC sub-ULAs, the cross-difference set
//! D(i,j) = {p_j(y) − p_i(x)} is computed by brute force and, where a closed
//! form exists, compared against it. Three stated lag ranges are then checked
//! for coverage, both by their quoted set unions and by the full difference
//! coarray, and the total positive consecutive segment is confirmed to be
//! exactly [1, MQ − 3M²/4 − M/2 + 1].
//!
//! Notation note (also emitted in report headers): the closed-form tables are
//! evaluated with the aperture product M·Q; the N symbol appearing in the
//! source tables is read as the sensor count Q.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::coarray::difference_coarray;
use crate::error::{Error, Result};
use crate::geometry::{imisc_geometry, imisc_sub_ulas, max_ies};

/// The 14 sub-ULA pairs with a closed-form cross-difference set.
pub const CLOSED_FORM_PAIRS: [(u8, u8); 14] = [
    (1, 2),
    (1, 3),
    (1, 4),
    (1, 5),
    (1, 6),
    (2, 4),
    (2, 5),
    (2, 6),
    (3, 4),
    (3, 5),
    (3, 6),
    (4, 5),
    (4, 6),
    (5, 6),
];

/// Brute-force cross-difference set D(i,j) = {p_j(y) − p_i(x)} between
/// sub-ULAs i and j of the IMISC array (1-based indices).
pub fn cross_difference(i: u8, j: u8, q: u32) -> Result<BTreeSet<i64>> {
    if !(1..=6).contains(&i) || !(1..=6).contains(&j) {
        return Err(Error::InvalidParameter(format!(
            "sub-ULA indices must lie in 1..=6, got ({i}, {j})"
        )));
    }
    let ulas = imisc_sub_ulas(q)?;
    let from = &ulas[i as usize - 1];
    let to = &ulas[j as usize - 1];
    Ok(to
        .iter()
        .flat_map(|&y| from.iter().map(move |&x| y as i64 - x as i64))
        .collect())
}

/// All pairwise sums of two lag sets.
fn set_sum(a: &BTreeSet<i64>, b: &BTreeSet<i64>) -> BTreeSet<i64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x + y)).collect()
}

fn arith_set(start: i64, step: i64, count: i64) -> BTreeSet<i64> {
    (0..count).map(|k| start + k * step).collect()
}

fn shifted(base: i64, set: BTreeSet<i64>) -> BTreeSet<i64> {
    set.into_iter().map(|x| base + x).collect()
}

/// Closed-form cross-difference set for the pairs in [`CLOSED_FORM_PAIRS`];
/// `None` for pairs without a listed closed form.
pub fn closed_cross_difference(i: u8, j: u8, q: u32) -> Result<Option<BTreeSet<i64>>> {
    let m = max_ies(q)? as i64;
    let q = q as i64;
    // Recurring index sets: even offsets within a half-period, the two sparse
    // step grids, and the main step-M grid.
    let ev = arith_set(0, 2, m / 4);
    let j35 = arith_set(0, m / 2 - 1, m / 4 - 1);
    let j57 = arith_set(0, m / 2 + 1, m / 4 - 1);
    let jm = arith_set(0, m, q - m);
    let pair = BTreeSet::from([0i64, 1]);

    let set = match (i, j) {
        (1, 2) => (1..=m / 2).collect(),
        (1, 3) => shifted(m / 2, set_sum(&ev, &j35)),
        (1, 4) => shifted(m * m / 8 + m / 4 + 2, set_sum(&ev, &jm)),
        (1, 5) => shifted(m * q - 7 * m * m / 8 - m / 4 + 3, set_sum(&ev, &j57)),
        (1, 6) => shifted(m * q - 3 * m * m / 4 - m + 3, set_sum(&ev, &ev)),
        (2, 4) => shifted(m * m / 8 + m / 4, set_sum(&pair, &jm)),
        (2, 5) => shifted(m * q - 7 * m * m / 8 - m / 4 + 1, set_sum(&pair, &j57)),
        (2, 6) => shifted(m * q - 3 * m * m / 4 - m + 1, set_sum(&pair, &ev)),
        (3, 4) => shifted(m, set_sum(&j35, &jm)),
        (3, 5) => shifted(m * q - m * m + m / 2 + 1, set_sum(&j35, &j57)),
        (3, 6) => shifted(m * q - 7 * m * m / 8 - m / 4 + 1, set_sum(&j35, &ev)),
        (4, 5) => shifted(m / 2 + 1, set_sum(&j57, &jm)),
        (4, 6) => shifted(m * m / 8 - m / 4 + 1, set_sum(&ev, &jm)),
        (5, 6) => shifted(2, set_sum(&ev, &j57)),
        _ => return Ok(None),
    };
    Ok(Some(set))
}

/// Result of one closed-form/brute-force set comparison.
#[derive(Debug, Clone, Serialize)]
pub struct SetCheck {
    pub i: u8,
    pub j: u8,
    pub equal: bool,
    pub closed_size: usize,
    pub brute_size: usize,
    /// Smallest lag present in exactly one of the two sets, if they differ.
    pub first_mismatch: Option<i64>,
}

/// Coverage status of one stated lag range.
#[derive(Debug, Clone, Serialize)]
pub struct RangeCoverage {
    pub lo: i64,
    pub hi: i64,
    /// The quoted union for this range, as sub-ULA pairs.
    pub pairs: Vec<(u8, u8)>,
    /// Lags in [lo, hi] missing from the quoted union (surfaced verbatim; a
    /// non-empty list here is a defect of the quoted union, not of the array).
    pub union_uncovered: Vec<i64>,
    /// Lags in [lo, hi] missing from the full difference coarray.
    pub coarray_uncovered: Vec<i64>,
}

/// Full verification report for a single sensor count.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub q: u32,
    pub m: u32,
    /// Positive end of the consecutive segment, MQ − 3M²/4 − M/2 + 1.
    pub l_plus: i64,
    pub sets: Vec<SetCheck>,
    pub ranges: [RangeCoverage; 3],
    /// Lags in [1, l_plus] missing from the difference coarray (must be empty).
    pub segment_uncovered: Vec<i64>,
    /// True when l_plus + 1 is not a lag, i.e. the segment bound is tight.
    pub segment_exact: bool,
}

impl CoverageReport {
    pub fn sets_ok(&self) -> bool {
        self.sets.iter().all(|s| s.equal)
    }

    /// All three ranges are covered by the coarray itself.
    pub fn ranges_ok(&self) -> bool {
        self.ranges.iter().all(|r| r.coarray_uncovered.is_empty())
    }

    pub fn segment_ok(&self) -> bool {
        self.segment_uncovered.is_empty() && self.segment_exact
    }

    /// Overall verdict: set identities, range coverage by the coarray, and
    /// the exact consecutive segment. Quoted-union gaps are surfaced in the
    /// report text but are informational (they indicate a defect in the
    /// quoted union, while the lags themselves exist in the coarray).
    pub fn passed(&self) -> bool {
        self.sets_ok() && self.ranges_ok() && self.segment_ok()
    }

    /// Human-readable report, one line per check.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "cross-difference verification: Q={} (M={}), consecutive segment [1, {}]",
            self.q, self.m, self.l_plus
        );
        let _ = writeln!(
            out,
            "note: closed forms use the aperture product M*Q (N in the source tables is read as Q)"
        );
        for s in &self.sets {
            let _ = write!(out, "  set D({},{})  Q={}  {}", s.i, s.j, self.q, pass(s.equal));
            if let Some(x) = s.first_mismatch {
                let _ = write!(out, "  first mismatch at lag {x}");
            }
            let _ = writeln!(out, "  ({} lags)", s.brute_size);
        }
        for (k, r) in self.ranges.iter().enumerate() {
            let _ = write!(
                out,
                "  range {} [{}, {}]: coarray coverage {}",
                k + 1,
                r.lo,
                r.hi,
                pass(r.coarray_uncovered.is_empty())
            );
            if !r.coarray_uncovered.is_empty() {
                let _ = write!(out, " (first missing lag {})", r.coarray_uncovered[0]);
            }
            if r.union_uncovered.is_empty() {
                let _ = writeln!(out, "; quoted union covers it");
            } else {
                let _ = writeln!(
                    out,
                    "; quoted union leaves {} lag(s) uncovered (first: {}) — known \
                     boundary defect of the quoted union; the lags exist in the coarray",
                    r.union_uncovered.len(),
                    r.union_uncovered[0]
                );
            }
        }
        let _ = writeln!(
            out,
            "  segment [1, {}]: {}; bound tight ({} absent): {}",
            self.l_plus,
            pass(self.segment_uncovered.is_empty()),
            self.l_plus + 1,
            pass(self.segment_exact)
        );
        let _ = writeln!(out, "  verdict: {}", pass(self.passed()));
        out
    }

    /// Machine-readable CSV (`check,q,pass,detail` rows).
    pub fn render_csv(&self) -> String {
        let mut out = String::from("check,q,pass,detail\n");
        for s in &self.sets {
            let detail = match s.first_mismatch {
                Some(x) => format!("first_mismatch={x}"),
                None => String::new(),
            };
            let _ = writeln!(out, "set_d{}{},{},{},{}", s.i, s.j, self.q, s.equal, detail);
        }
        for (k, r) in self.ranges.iter().enumerate() {
            let _ = writeln!(
                out,
                "range{}_coarray,{},{},uncovered={}",
                k + 1,
                self.q,
                r.coarray_uncovered.is_empty(),
                join(&r.coarray_uncovered)
            );
            let _ = writeln!(
                out,
                "range{}_union,{},{},uncovered={}",
                k + 1,
                self.q,
                r.union_uncovered.is_empty(),
                join(&r.union_uncovered)
            );
        }
        let _ = writeln!(
            out,
            "segment,{},{},uncovered={}",
            self.q,
            self.segment_ok(),
            join(&self.segment_uncovered)
        );
        out
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn join(lags: &[i64]) -> String {
    lags.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// The quoted set unions for the three coverage ranges.
const RANGE_UNIONS: [&[(u8, u8)]; 3] = [
    &[(1, 2), (1, 3), (3, 4), (4, 5), (5, 6)],
    &[(1, 4), (2, 4), (3, 4), (4, 5), (4, 6), (4, 4)],
    &[(1, 5), (1, 6), (2, 5), (2, 6), (3, 5), (3, 6), (1, 4), (2, 4), (4, 6)],
];

/// Verifies every closed-form cross-difference identity and the three
/// coverage claims for the IMISC array with Q sensors.
pub fn verify_coverage(q: u32) -> Result<CoverageReport> {
    let m = max_ies(q)? as i64;
    let qi = q as i64;
    let l_plus = m * qi - 3 * m * m / 4 - m / 2 + 1;

    let mut sets = Vec::with_capacity(CLOSED_FORM_PAIRS.len());
    for &(i, j) in &CLOSED_FORM_PAIRS {
        let brute = cross_difference(i, j, q)?;
        let closed = closed_cross_difference(i, j, q)?
            .expect("every listed pair has a closed form");
        let first_mismatch = closed.symmetric_difference(&brute).min().copied();
        sets.push(SetCheck {
            i,
            j,
            equal: first_mismatch.is_none(),
            closed_size: closed.len(),
            brute_size: brute.len(),
            first_mismatch,
        });
    }

    let coarray = difference_coarray(&imisc_geometry(q)?);
    let range_bounds = [
        (1, m * m / 8 - m / 4),
        (m * m / 8 - m / 4 + 1, m * qi - 7 * m * m / 8 - 5 * m / 4 + 3),
        (m * qi - 7 * m * m / 8 - 5 * m / 4 + 3, l_plus),
    ];
    let mut ranges = Vec::with_capacity(3);
    for (k, &(lo, hi)) in range_bounds.iter().enumerate() {
        let mut union = BTreeSet::new();
        for &(i, j) in RANGE_UNIONS[k] {
            union.extend(cross_difference(i, j, q)?);
        }
        let union_uncovered = (lo..=hi).filter(|x| !union.contains(x)).collect();
        let coarray_uncovered = (lo..=hi)
            .filter(|&x| !coarray.weights.contains_key(&x))
            .collect();
        ranges.push(RangeCoverage {
            lo,
            hi,
            pairs: RANGE_UNIONS[k].to_vec(),
            union_uncovered,
            coarray_uncovered,
        });
    }
    let ranges: [RangeCoverage; 3] = ranges.try_into().expect("exactly three ranges");

    let segment_uncovered: Vec<i64> = (1..=l_plus)
        .filter(|&x| !coarray.weights.contains_key(&x))
        .collect();
    let segment_exact = !coarray.weights.contains_key(&(l_plus + 1));
    debug_assert_eq!(coarray.consecutive_bound as i64, l_plus);

    Ok(CoverageReport {
        q,
        m: m as u32,
        l_plus,
        sets,
        ranges,
        segment_uncovered,
        segment_exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d12_is_one_through_half_m() {
        for q in [10u32, 16, 22] {
            let m = max_ies(q).unwrap() as i64;
            let expect: BTreeSet<i64> = (1..=m / 2).collect();
            assert_eq!(cross_difference(1, 2, q).unwrap(), expect);
            assert_eq!(closed_cross_difference(1, 2, q).unwrap().unwrap(), expect);
        }
    }

    #[test]
    fn self_difference_of_ula4_is_step_m_grid() {
        let q = 10;
        let d44 = cross_difference(4, 4, q).unwrap();
        let expect: BTreeSet<i64> = [-8i64, 0, 8].into_iter().collect();
        assert_eq!(d44, expect);
    }

    #[test]
    fn cross_difference_antisymmetry() {
        for q in [10u32, 16] {
            for i in 1..=6u8 {
                for j in 1..=6u8 {
                    let fwd = cross_difference(i, j, q).unwrap();
                    let rev: BTreeSet<i64> =
                        cross_difference(j, i, q).unwrap().into_iter().map(|x| -x).collect();
                    assert_eq!(fwd, rev, "Q={q} pair ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn invalid_indices_rejected() {
        assert!(cross_difference(0, 3, 10).is_err());
        assert!(cross_difference(1, 7, 10).is_err());
    }

    #[test]
    fn d56_closed_form_matches_at_q22() {
        let brute = cross_difference(5, 6, 22).unwrap();
        let closed = closed_cross_difference(5, 6, 22).unwrap().unwrap();
        assert_eq!(brute, closed);
    }

    #[test]
    fn all_closed_forms_match_across_q_values() {
        for q in [10u32, 16, 22, 28, 34, 40, 52, 100] {
            let report = verify_coverage(q).unwrap();
            assert!(report.sets_ok(), "closed-form mismatch at Q={q}:\n{}", report.render());
        }
    }

    #[test]
    fn q10_ranges_and_segment() {
        let r = verify_coverage(10).unwrap();
        assert_eq!(r.l_plus, 29);
        assert_eq!((r.ranges[0].lo, r.ranges[0].hi), (1, 6));
        assert!(r.passed());
        // at Q=10 even the quoted unions are complete
        assert!(r.ranges.iter().all(|x| x.union_uncovered.is_empty()));
    }

    #[test]
    fn q16_segment_end() {
        let r = verify_coverage(16).unwrap();
        assert_eq!(r.l_plus, 12 * 16 - 108 - 6 + 1);
        assert!(r.passed());
    }

    #[test]
    fn quoted_union_gap_at_q22_is_surfaced_not_masked() {
        // The quoted union for range 2 misses lag 105 at Q=22 (it is only
        // generated by D(3,5), a range-3 set). The coarray itself covers it,
        // so the overall verdict stands while the gap is reported.
        let r = verify_coverage(22).unwrap();
        assert!(r.passed());
        assert_eq!(r.ranges[1].union_uncovered, vec![105]);
        assert!(r.ranges[1].coarray_uncovered.is_empty());
        assert!(r.render().contains("quoted union leaves 1 lag(s) uncovered (first: 105)"));
    }

    #[test]
    fn coverage_holds_across_full_range() {
        for q in (10..=200).step_by(13) {
            let r = verify_coverage(q).unwrap();
            assert!(r.ranges_ok() && r.segment_ok(), "Q={q}:\n{}", r.render());
        }
    }
}
