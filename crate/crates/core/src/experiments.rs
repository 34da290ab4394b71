//! Experiment orchestration: scenario configuration, Monte-Carlo RMSE sweeps
//! with deterministic per-trial random streams, structural sweeps (uDOF and
//! coupling leakage versus sensor count), and the verification suites used by
//! the command-line front end.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coarray::{
    coupling_leakage, difference_coarray, imisc_udof_closed_form, imisc_udof_residue_form,
    imisc_weights_closed_form, misc_udof_closed_form, CouplingModel,
};
use crate::error::{Error, Result};
use crate::estimation::{
    sample_covariance, smoothed_coarray_covariance, synthesize_snapshots, SourceScene,
};
use crate::geometry::{
    coprime_geometry, imisc_geometry, imisc_ies, imisc_sub_ulas, max_ies, misc_geometry,
    nested_geometry, ArrayGeometry,
};
use crate::music::{music_estimate, rmse, MusicGrid};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives an independent stream seed for one (sweep point, trial) cell.
/// Results therefore depend only on the master seed and the cell indices,
/// never on scheduling or worker count.
pub fn trial_seed(master: u64, point: u64, trial: u64) -> u64 {
    let mut s = splitmix64(master);
    s = splitmix64(s ^ point);
    splitmix64(s ^ trial)
}

/// Full description of one Monte-Carlo scenario. Serializable as the CLI's
/// JSON config format; unset fields take these defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Array construction: imisc | nested | coprime | misc | custom.
    pub array: String,
    /// Sensor count (construction parameters for baselines are derived from
    /// it unless overridden below).
    pub q: u32,
    /// Explicit nested levels (n1, n2); overrides derivation from `q`.
    pub nested: Option<(u32, u32)>,
    /// Explicit coprime pair (p, q); overrides derivation from `q`.
    pub coprime: Option<(u32, u32)>,
    /// Explicit positions for `array = "custom"`.
    pub positions: Option<Vec<u32>>,
    /// Source count R.
    pub sources: usize,
    /// Sources are placed evenly spaced strictly inside this field.
    pub field_min_deg: f64,
    pub field_max_deg: f64,
    pub snr_db: f64,
    pub snapshots: usize,
    /// Mutual-coupling reference coefficient a1 in polar form; magnitude 0
    /// disables coupling.
    pub a1_mag: f64,
    pub a1_phase_deg: f64,
    pub coupling_band: u32,
    pub trials: usize,
    pub grid: MusicGrid,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            array: "imisc".into(),
            q: 34,
            nested: None,
            coprime: None,
            positions: None,
            sources: 39,
            field_min_deg: -60.0,
            field_max_deg: 60.0,
            snr_db: 0.0,
            snapshots: 1000,
            a1_mag: 0.3,
            a1_phase_deg: 60.0,
            coupling_band: CouplingModel::DEFAULT_BAND,
            trials: 500,
            grid: MusicGrid::default(),
            seed: 1,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.sources == 0 || self.trials == 0 || self.snapshots == 0 {
            return Err(Error::InvalidParameter(
                "sources, trials, and snapshots must all be at least 1".into(),
            ));
        }
        if !(-90.0 < self.field_min_deg
            && self.field_min_deg < self.field_max_deg
            && self.field_max_deg < 90.0)
        {
            return Err(Error::InvalidParameter(
                "source field must satisfy -90 < min < max < 90 degrees".into(),
            ));
        }
        if self.grid.step_deg <= 0.0 || self.grid.min_deg >= self.grid.max_deg {
            return Err(Error::InvalidParameter("invalid scan grid".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        match self.array.as_str() {
            "imisc" => imisc_geometry(self.q),
            "nested" => {
                let (n1, n2) = match self.nested {
                    Some(pair) => pair,
                    None => nested_params(self.q)?,
                };
                nested_geometry(n1, n2)
            }
            "coprime" => {
                let (p, q) = match self.coprime {
                    Some(pair) => pair,
                    None => coprime_params(self.q)?,
                };
                coprime_geometry(p, q)
            }
            "misc" => misc_geometry(self.q),
            "custom" => {
                let positions = self.positions.clone().ok_or_else(|| {
                    Error::InvalidParameter("custom array requires explicit positions".into())
                })?;
                ArrayGeometry::from_positions("custom", positions)
            }
            other => Err(Error::InvalidParameter(format!("unknown array label '{other}'"))),
        }
    }

    pub fn coupling(&self) -> Result<CouplingModel> {
        let a1 = num_complex::Complex64::from_polar(self.a1_mag, self.a1_phase_deg.to_radians());
        CouplingModel::new(a1, self.coupling_band)
    }

    /// True source directions: R angles evenly spaced strictly inside the
    /// field (deterministic, so every trial shares the same truth).
    pub fn source_angles(&self) -> Vec<f64> {
        let span = self.field_max_deg - self.field_min_deg;
        let r = self.sources;
        (0..r)
            .map(|k| self.field_min_deg + span * (k as f64 + 1.0) / (r as f64 + 1.0))
            .collect()
    }
}

/// Which scenario field an RMSE sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Snr,
    Coupling,
    Snapshots,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr_db",
            SweepAxis::Coupling => "a1_mag",
            SweepAxis::Snapshots => "snapshots",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn apply_axis(base: &Scenario, axis: SweepAxis, value: f64) -> Result<Scenario> {
    let mut s = base.clone();
    match axis {
        SweepAxis::Snr => s.snr_db = value,
        SweepAxis::Coupling => s.a1_mag = value,
        SweepAxis::Snapshots => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "snapshot sweep values must be positive integers, got {value}"
                )));
            }
            s.snapshots = value as usize;
        }
    }
    Ok(s)
}

/// Aggregated result at one sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub sweep_value: f64,
    /// None when every trial failed (peak deficit).
    pub rmse_deg: Option<f64>,
    /// Delta-method standard error of the RMSE over trials.
    pub se_deg: Option<f64>,
    pub failed_trials: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RmseReport {
    pub axis: SweepAxis,
    pub scenario: Scenario,
    pub truth_deg: Vec<f64>,
    pub points: Vec<SweepPoint>,
}

/// Runs the Monte-Carlo sweep. Trials parallelize over the active rayon
/// pool; aggregation order is fixed by trial index, so the report (and any
/// CSV rendered from it) is byte-stable for a given config and master seed.
pub fn run_rmse_sweep(base: &Scenario, sweep: &SweepSpec) -> Result<RmseReport> {
    base.validate()?;
    if sweep.values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one value".into()));
    }
    let geom = base.geometry()?;
    let profile = difference_coarray(&geom);
    if base.sources > profile.consecutive_bound as usize {
        return Err(Error::Estimation(format!(
            "{} sources exceed the coarray identifiability bound L = {} of '{}' \
             (Q = {}); reduce R or enlarge the array",
            base.sources,
            profile.consecutive_bound,
            geom.label(),
            geom.sensor_count()
        )));
    }
    let truth = base.source_angles();
    let mut values = sweep.values.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();

    let mut points = Vec::with_capacity(values.len());
    for (pi, &value) in values.iter().enumerate() {
        let s = apply_axis(base, sweep.axis, value)?;
        let scene = SourceScene::equal_power(truth.clone(), s.snr_db)?;
        let coupling = s.coupling()?;
        let outcomes: Vec<Option<Vec<f64>>> = (0..s.trials)
            .into_par_iter()
            .map(|ti| -> Result<Option<Vec<f64>>> {
                let seed = trial_seed(s.seed, pi as u64, ti as u64);
                let snaps = synthesize_snapshots(&geom, &scene, &coupling, s.snapshots, seed)?;
                let rss = smoothed_coarray_covariance(
                    &sample_covariance(&snaps),
                    &profile,
                    &geom,
                )?;
                let res = music_estimate(&rss, s.sources, &s.grid)?;
                Ok(if res.failed { None } else { Some(res.estimates_deg) })
            })
            .collect::<Result<_>>()?;

        let successes: Vec<Vec<f64>> = outcomes.iter().flatten().cloned().collect();
        let failed_trials = s.trials - successes.len();
        let (rmse_deg, se_deg) = if successes.is_empty() {
            (None, None)
        } else {
            let overall = rmse(&successes, &truth)?;
            let se = standard_error_of_rmse(&successes, &truth, overall);
            (Some(overall), se)
        };
        points.push(SweepPoint {
            sweep_value: value,
            rmse_deg,
            se_deg,
            failed_trials,
            trials: s.trials,
        });
    }
    Ok(RmseReport { axis: sweep.axis, scenario: base.clone(), truth_deg: truth, points })
}

/// Delta-method standard error: sd(per-trial MSE) / (2·RMSE·√K).
fn standard_error_of_rmse(trials: &[Vec<f64>], truth: &[f64], overall: f64) -> Option<f64> {
    let k = trials.len();
    if k < 2 || overall == 0.0 {
        return None;
    }
    let mut sorted_truth = truth.to_vec();
    sorted_truth.sort_by(f64::total_cmp);
    let mses: Vec<f64> = trials
        .iter()
        .map(|est| {
            let mut e = est.clone();
            e.sort_by(f64::total_cmp);
            e.iter().zip(&sorted_truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                / truth.len() as f64
        })
        .collect();
    let mean = mses.iter().sum::<f64>() / k as f64;
    let var = mses.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (k as f64 - 1.0);
    Some(var.sqrt() / (2.0 * overall * (k as f64).sqrt()))
}

/// Nested levels (n1, n2) with n1 + n2 = Q, splitting as evenly as possible
/// (which maximizes the nested uDOF n2(n1+1) at fixed Q).
pub fn nested_params(q: u32) -> Result<(u32, u32)> {
    if q < 2 {
        return Err(Error::SensorCount { label: "nested", given: q as i64, constraint: "Q >= 2" });
    }
    Ok((q / 2, q - q / 2))
}

/// Coprime pair (p, q') with 2q' + p − 1 = Q maximizing the brute-force uDOF
/// of the extended coprime layout; the chosen pair is reported alongside
/// sweep rows so baseline curves are unambiguous.
pub fn coprime_params(q: u32) -> Result<(u32, u32)> {
    let mut best: Option<(u64, u32, u32)> = None;
    for q2 in 2..q {
        let p = (q + 1).checked_sub(2 * q2);
        let Some(p) = p.filter(|&p| p >= 1 && p < q2) else { continue };
        let Ok(geom) = coprime_geometry(p, q2) else { continue };
        let udof = difference_coarray(&geom).udof;
        if best.map_or(true, |(u, _, _)| udof > u) {
            best = Some((udof, p, q2));
        }
    }
    best.map(|(_, p, q2)| (p, q2)).ok_or(Error::SensorCount {
        label: "coprime",
        given: q as i64,
        constraint: "no coprime pair (p, q) with 2q + p - 1 = Q exists",
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayKind {
    Imisc,
    Misc,
    Nested,
    Coprime,
}

impl ArrayKind {
    pub const ALL: [ArrayKind; 4] = [ArrayKind::Imisc, ArrayKind::Misc, ArrayKind::Nested, ArrayKind::Coprime];

    pub fn as_str(&self) -> &'static str {
        match self {
            ArrayKind::Imisc => "imisc",
            ArrayKind::Misc => "misc",
            ArrayKind::Nested => "nested",
            ArrayKind::Coprime => "coprime",
        }
    }
}

impl std::str::FromStr for ArrayKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imisc" => Ok(ArrayKind::Imisc),
            "misc" => Ok(ArrayKind::Misc),
            "nested" => Ok(ArrayKind::Nested),
            "coprime" => Ok(ArrayKind::Coprime),
            other => Err(Error::InvalidParameter(format!("unknown array label '{other}'"))),
        }
    }
}

/// One uDOF sweep row; `udof` is None when the construction is unavailable
/// at this sensor count.
#[derive(Debug, Clone, Serialize)]
pub struct UdofRow {
    pub array: &'static str,
    pub q: u32,
    pub udof: Option<u64>,
    pub params: String,
}

/// Brute-force uDOF (closed form for the geometry-less MISC baseline) per
/// array and sensor count.
pub fn udof_sweep(kinds: &[ArrayKind], qs: &[u32]) -> Vec<UdofRow> {
    let mut rows = Vec::with_capacity(kinds.len() * qs.len());
    for &q in qs {
        for &kind in kinds {
            let (udof, params) = match kind {
                ArrayKind::Imisc => match imisc_geometry(q) {
                    Ok(g) => (
                        Some(difference_coarray(&g).udof),
                        format!("M={}", g.max_ies().expect("imisc geometry carries M")),
                    ),
                    Err(e) => (None, format!("unavailable: {e}")),
                },
                ArrayKind::Misc => match misc_udof_closed_form(q) {
                    Ok(v) => (Some(v), "closed-form (no position set)".to_string()),
                    Err(e) => (None, format!("unavailable: {e}")),
                },
                ArrayKind::Nested => match nested_params(q).and_then(|(a, b)| {
                    nested_geometry(a, b).map(|g| (difference_coarray(&g).udof, a, b))
                }) {
                    Ok((u, a, b)) => (Some(u), format!("n1={a};n2={b}")),
                    Err(e) => (None, format!("unavailable: {e}")),
                },
                ArrayKind::Coprime => match coprime_params(q).and_then(|(p, q2)| {
                    coprime_geometry(p, q2).map(|g| (difference_coarray(&g).udof, p, q2))
                }) {
                    Ok((u, p, q2)) => (Some(u), format!("p={p};q={q2}")),
                    Err(e) => (None, format!("unavailable: {e}")),
                },
            };
            rows.push(UdofRow { array: kind.as_str(), q, udof, params });
        }
    }
    rows
}

/// One leakage sweep row; `leakage` is None when the construction has no
/// position set to evaluate the coupling matrix on.
#[derive(Debug, Clone, Serialize)]
pub struct LeakageRow {
    pub array: &'static str,
    pub q: u32,
    pub leakage: Option<f64>,
    pub params: String,
}

pub fn leakage_sweep(kinds: &[ArrayKind], qs: &[u32], model: &CouplingModel) -> Vec<LeakageRow> {
    let mut rows = Vec::with_capacity(kinds.len() * qs.len());
    for &q in qs {
        for &kind in kinds {
            let built: Result<(ArrayGeometry, String)> = match kind {
                ArrayKind::Imisc => imisc_geometry(q).map(|g| {
                    let m = g.max_ies().expect("imisc geometry carries M");
                    (g, format!("M={m}"))
                }),
                ArrayKind::Misc => misc_geometry(q).map(|g| (g, String::new())),
                ArrayKind::Nested => nested_params(q)
                    .and_then(|(a, b)| nested_geometry(a, b).map(|g| (g, format!("n1={a};n2={b}")))),
                ArrayKind::Coprime => coprime_params(q)
                    .and_then(|(p, q2)| coprime_geometry(p, q2).map(|g| (g, format!("p={p};q={q2}")))),
            };
            let (leakage, params) = match built {
                Ok((g, ps)) => (Some(coupling_leakage(&g, model)), ps),
                Err(e) => (None, format!("unavailable: {e}")),
            };
            rows.push(LeakageRow { array: kind.as_str(), q, leakage, params });
        }
    }
    rows
}

/// One sensor count's closed-form/brute-force comparison.
#[derive(Debug, Clone, Serialize)]
pub struct FormulaCheck {
    pub q: u32,
    pub udof_brute: u64,
    pub udof_closed: u64,
    pub udof_residue: u64,
    pub weights_brute: [u64; 3],
    pub weights_closed: [u64; 3],
    pub aperture_ok: bool,
    pub partition_ok: bool,
}

impl FormulaCheck {
    pub fn passed(&self) -> bool {
        self.udof_brute == self.udof_closed
            && self.udof_brute == self.udof_residue
            && self.weights_brute == self.weights_closed
            && self.aperture_ok
            && self.partition_ok
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FormulaReport {
    pub q_start: u32,
    pub q_end: u32,
    pub checks: Vec<FormulaCheck>,
}

impl FormulaReport {
    pub fn failures(&self) -> Vec<&FormulaCheck> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "formula suite: Q in [{}, {}], {} sensor counts",
            self.q_start,
            self.q_end,
            self.checks.len()
        );
        for c in self.failures() {
            let _ = writeln!(
                out,
                "  Q={}  FAIL  udof brute/closed/residue = {}/{}/{}  w123 brute/closed = \
                 {:?}/{:?}  aperture_ok={}  partition_ok={}",
                c.q,
                c.udof_brute,
                c.udof_closed,
                c.udof_residue,
                c.weights_brute,
                c.weights_closed,
                c.aperture_ok,
                c.partition_ok
            );
        }
        let _ = writeln!(
            out,
            "  uDOF, weight, aperture, and partition identities: {} failures",
            self.failures().len()
        );
        out
    }
}

/// Checks every closed form (uDOF product and residue forms, first three
/// weights, aperture, sub-ULA partition) against brute force over a sensor
/// count range.
pub fn verify_formulas(q_start: u32, q_end: u32) -> Result<FormulaReport> {
    if q_start < 10 || q_start > q_end {
        return Err(Error::InvalidParameter(format!(
            "formula suite needs 10 <= q_start <= q_end, got [{q_start}, {q_end}]"
        )));
    }
    let checks: Vec<FormulaCheck> = (q_start..=q_end)
        .into_par_iter()
        .map(|q| -> Result<FormulaCheck> {
            let geom = imisc_geometry(q)?;
            let profile = difference_coarray(&geom);
            let m = max_ies(q)? as i64;
            let aperture_ok =
                geom.aperture() as i64 == m * q as i64 - 3 * m * m / 4 - 1;
            let flat: Vec<u32> =
                imisc_sub_ulas(q)?.iter().flatten().copied().collect();
            let partition_ok =
                flat == geom.positions() && geom.ies() == imisc_ies(q)?;
            Ok(FormulaCheck {
                q,
                udof_brute: profile.udof,
                udof_closed: imisc_udof_closed_form(q)?,
                udof_residue: imisc_udof_residue_form(q)?,
                weights_brute: profile.w123(),
                weights_closed: imisc_weights_closed_form(q)?,
                aperture_ok,
                partition_ok,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FormulaReport { q_start, q_end, checks })
}

/// One named check of a user-supplied geometry.
#[derive(Debug, Clone, Serialize)]
pub struct GeometryCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub expected_q: u32,
    pub checks: Vec<GeometryCheck>,
}

impl GeometryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "geometry verification against imisc Q={}", self.expected_q);
        for c in &self.checks {
            let _ = writeln!(
                out,
                "  {:<12} {}{}",
                c.name,
                if c.pass { "pass" } else { "FAIL" },
                if c.detail.is_empty() { String::new() } else { format!("  ({})", c.detail) }
            );
        }
        let _ = writeln!(out, "  verdict: {}", if self.passed() { "pass" } else { "FAIL" });
        out
    }
}

/// Verifies a position set against the IMISC construction for the expected
/// sensor count: positions, aperture, uDOF, leading weights, and coverage of
/// the expected consecutive lag segment.
pub fn verify_geometry_against_imisc(expected_q: u32, positions: &[u32]) -> Result<GeometryReport> {
    let reference = imisc_geometry(expected_q)?;
    let expected_l = (imisc_udof_closed_form(expected_q)? - 1) / 2;
    let mut checks = Vec::new();

    checks.push(GeometryCheck {
        name: "sensor-count",
        pass: positions.len() == expected_q as usize,
        detail: format!("{} of {}", positions.len(), expected_q),
    });

    let geom = ArrayGeometry::from_positions("candidate", positions.to_vec())?;
    checks.push(GeometryCheck {
        name: "positions",
        pass: geom.positions() == reference.positions(),
        detail: match geom
            .positions()
            .iter()
            .zip(reference.positions())
            .position(|(a, b)| a != b)
        {
            Some(i) => format!("first difference at index {i}"),
            None if geom.sensor_count() != reference.sensor_count() => {
                "length differs".to_string()
            }
            None => String::new(),
        },
    });
    checks.push(GeometryCheck {
        name: "aperture",
        pass: geom.aperture() == reference.aperture(),
        detail: format!("{} of {}", geom.aperture(), reference.aperture()),
    });

    let profile = difference_coarray(&geom);
    checks.push(GeometryCheck {
        name: "udof",
        pass: profile.udof == imisc_udof_closed_form(expected_q)?,
        detail: format!("{} of {}", profile.udof, imisc_udof_closed_form(expected_q)?),
    });
    checks.push(GeometryCheck {
        name: "weights",
        pass: profile.w123() == imisc_weights_closed_form(expected_q)?,
        detail: format!(
            "{:?} of {:?}",
            profile.w123(),
            imisc_weights_closed_form(expected_q)?
        ),
    });

    let uncovered: Vec<i64> = (1..=expected_l as i64)
        .filter(|l| !profile.weights.contains_key(l))
        .collect();
    checks.push(GeometryCheck {
        name: "coverage",
        pass: uncovered.is_empty(),
        detail: if uncovered.is_empty() {
            format!("lags [1, {expected_l}] all present")
        } else {
            format!("{} uncovered lag(s) in [1, {expected_l}], first: {}", uncovered.len(), uncovered[0])
        },
    });

    Ok(GeometryReport { expected_q, checks })
}
