//! Command-line front end: geometry inspection and export, coarray analysis,
//! structural sweeps (uDOF, coupling leakage), Monte-Carlo RMSE sweeps, and
//! the verification suites. Sweeps emit plot-ready CSV with fixed headers;
//! verification emits plain-text reports and a nonzero exit status on any
//! failing check.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use coarray_core::{
    difference_coarray, leakage_sweep, run_rmse_sweep, udof_sweep, verify_coverage,
    verify_formulas, verify_geometry_against_imisc, ArrayGeometry, ArrayKind, CouplingModel,
    MusicGrid, Scenario, SweepAxis, SweepPoint, SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "coarray",
    version,
    about = "Sparse-array coarray analysis and DOA Monte-Carlo toolkit"
)]
struct Cli {
    /// Worker threads for parallel sections (default: one per logical CPU).
    /// Results are independent of this setting.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory that relative --out paths are resolved against.
    #[arg(long, global = true, env = "COARRAY_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an array geometry and print or export it.
    Geometry(GeometryArgs),
    /// Difference-coarray profile (lags, uDOF, weights, holes) of an array.
    Coarray(CoarrayArgs),
    /// uDOF versus sensor count for a set of arrays (CSV).
    SweepUdof(SweepUdofArgs),
    /// Coupling leakage versus sensor count for a set of arrays (CSV).
    SweepLeakage(SweepLeakageArgs),
    /// Monte-Carlo RMSE sweep over SNR, coupling strength, or snapshots (CSV).
    Rmse(RmseArgs),
    /// Run verification suites; exits nonzero if any check fails.
    Verify(VerifyArgs),
}

/// Array selection shared by `geometry` and `coarray`.
#[derive(Args)]
struct ArraySelect {
    /// Array construction: imisc, nested, coprime, misc, or custom.
    #[arg(long, default_value = "imisc")]
    array: String,

    /// Sensor count Q (baseline parameters are derived from it unless
    /// overridden).
    #[arg(long, default_value_t = 10)]
    q: u32,

    /// Nested inner level n1 (with --n2; overrides derivation from Q).
    #[arg(long, requires = "n2")]
    n1: Option<u32>,

    /// Nested outer level n2.
    #[arg(long, requires = "n1")]
    n2: Option<u32>,

    /// Coprime pair "p,q" (overrides derivation from Q).
    #[arg(long, value_parser = parse_pair)]
    pair: Option<(u32, u32)>,

    /// Explicit comma-separated positions (for --array custom).
    #[arg(long, value_delimiter = ',')]
    positions: Option<Vec<u32>>,
}

impl ArraySelect {
    fn build(&self) -> Result<ArrayGeometry> {
        let scenario = Scenario {
            array: self.array.clone(),
            q: self.q,
            nested: self.n1.zip(self.n2),
            coprime: self.pair,
            positions: self.positions.clone(),
            ..Scenario::default()
        };
        Ok(scenario.geometry()?)
    }
}

fn parse_pair(s: &str) -> Result<(u32, u32), String> {
    let mut it = s.split(',');
    let err = || format!("expected \"p,q\", got \"{s}\"");
    let p = it.next().ok_or_else(err)?.trim().parse().map_err(|_| err())?;
    let q = it.next().ok_or_else(err)?.trim().parse().map_err(|_| err())?;
    if it.next().is_some() {
        return Err(err());
    }
    Ok((p, q))
}

#[derive(Args)]
struct GeometryArgs {
    #[command(flatten)]
    select: ArraySelect,

    /// Output format: text (one position per line) or json (structured record).
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Structured geometry record used for JSON export and `verify --geometry`.
#[derive(Serialize, Deserialize)]
struct GeometryRecord {
    label: String,
    q: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<u32>,
    positions: Vec<u32>,
}

impl GeometryRecord {
    fn from_geometry(geom: &ArrayGeometry) -> Self {
        Self {
            label: geom.label().to_string(),
            q: geom.sensor_count() as u32,
            m: geom.max_ies(),
            positions: geom.positions().to_vec(),
        }
    }
}

#[derive(Args)]
struct CoarrayArgs {
    #[command(flatten)]
    select: ArraySelect,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepUdofArgs {
    /// Comma-separated array list.
    #[arg(long, value_delimiter = ',', default_value = "imisc,misc,nested,coprime")]
    arrays: Vec<String>,

    #[arg(long, default_value_t = 20)]
    q_start: u32,

    #[arg(long, default_value_t = 100)]
    q_end: u32,

    #[arg(long, default_value_t = 10)]
    q_step: u32,

    /// Explicit sensor counts (overrides --q-start/--q-end/--q-step).
    #[arg(long, value_delimiter = ',')]
    qs: Option<Vec<u32>>,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepLeakageArgs {
    #[command(flatten)]
    sweep: SweepUdofArgs,

    /// Coupling coefficient magnitude |a1|.
    #[arg(long, default_value_t = 0.3)]
    a1_mag: f64,

    /// Coupling coefficient phase arg(a1), degrees.
    #[arg(long, default_value_t = 60.0, allow_negative_numbers = true)]
    a1_phase_deg: f64,

    /// Coupling range cutoff D (separations beyond this do not couple).
    #[arg(long, default_value_t = CouplingModel::DEFAULT_BAND)]
    band: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Snr,
    Coupling,
    Snapshots,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Snr => SweepAxis::Snr,
            AxisArg::Coupling => SweepAxis::Coupling,
            AxisArg::Snapshots => SweepAxis::Snapshots,
        }
    }
}

#[derive(Args)]
struct RmseArgs {
    /// JSON scenario config; unset fields keep preset values, flags below
    /// override both.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Published scenario preset: snr (Q=34, R=39, SNR sweep), coupling
    /// (Q=35, R=50, |a1| sweep), snapshots (Q=37, R=45, snapshot sweep).
    #[arg(long, value_enum, default_value_t = AxisArg::Snr)]
    preset: AxisArg,

    /// Sweep axis (defaults to the preset's axis).
    #[arg(long, value_enum)]
    axis: Option<AxisArg>,

    /// Comma-separated sweep values (defaults per axis).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,

    #[arg(long)]
    array: Option<String>,
    #[arg(long)]
    q: Option<u32>,
    #[arg(long)]
    sources: Option<usize>,
    #[arg(long)]
    snapshots: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    a1_mag: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    a1_phase_deg: Option<f64>,
    #[arg(long)]
    band: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    field_min_deg: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    field_max_deg: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    grid_min_deg: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    grid_max_deg: Option<f64>,
    #[arg(long)]
    grid_step_deg: Option<f64>,

    #[arg(long)]
    out: Option<PathBuf>,
}

/// Optional-field mirror of [`Scenario`] (plus the sweep); this is the
/// config-file schema. Present fields override the preset, flags override
/// both.
#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    array: Option<String>,
    q: Option<u32>,
    nested: Option<(u32, u32)>,
    coprime: Option<(u32, u32)>,
    positions: Option<Vec<u32>>,
    sources: Option<usize>,
    field_min_deg: Option<f64>,
    field_max_deg: Option<f64>,
    snr_db: Option<f64>,
    snapshots: Option<usize>,
    a1_mag: Option<f64>,
    a1_phase_deg: Option<f64>,
    coupling_band: Option<u32>,
    trials: Option<usize>,
    grid: Option<MusicGrid>,
    seed: Option<u64>,
    sweep: Option<SweepSpec>,
}

macro_rules! apply_fields {
    ($dst:expr, $src:expr, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $src.$field.clone() { $dst.$field = v; })+
    };
}

impl ConfigFile {
    fn apply(&self, s: &mut Scenario) {
        apply_fields!(
            s, self, array, q, sources, field_min_deg, field_max_deg, snr_db, snapshots, a1_mag,
            a1_phase_deg, coupling_band, trials, grid, seed
        );
        if self.nested.is_some() {
            s.nested = self.nested;
        }
        if self.coprime.is_some() {
            s.coprime = self.coprime;
        }
        if self.positions.is_some() {
            s.positions = self.positions.clone();
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Formulas,
    Crossdiff,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    /// Which suites to run (ignored in --geometry mode).
    #[arg(long, value_enum, default_value_t = Suite::All)]
    suite: Suite,

    /// Formula suite sensor-count range.
    #[arg(long, default_value_t = 10)]
    q_start: u32,

    #[arg(long, default_value_t = 200)]
    q_end: u32,

    /// Cross-difference suite sensor counts.
    #[arg(long, value_delimiter = ',', default_value = "10,16,22,28,34")]
    qs: Vec<u32>,

    /// Check a geometry file (JSON record, or one position per line) against
    /// the construction for --expect-imisc.
    #[arg(long, requires = "expect_imisc")]
    geometry: Option<PathBuf>,

    /// Expected IMISC sensor count for --geometry mode.
    #[arg(long, requires = "geometry")]
    expect_imisc: Option<u32>,

    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let out_dir = cli.out_dir;
    match cli.command {
        Command::Geometry(a) => cmd_geometry(a, out_dir.as_deref()),
        Command::Coarray(a) => cmd_coarray(a, out_dir.as_deref()),
        Command::SweepUdof(a) => cmd_sweep_udof(a, out_dir.as_deref()),
        Command::SweepLeakage(a) => cmd_sweep_leakage(a, out_dir.as_deref()),
        Command::Rmse(a) => cmd_rmse(a, out_dir.as_deref()),
        Command::Verify(a) => cmd_verify(a, out_dir.as_deref()),
    }
}

fn resolve_out(out: Option<PathBuf>, out_dir: Option<&Path>) -> Option<PathBuf> {
    out.map(|p| match out_dir {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    })
}

/// Writes to the resolved path (creating parent directories) or stdout.
fn emit(path: Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(&p, content).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

/// Quotes a CSV field if it contains a delimiter, quote, or newline.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_geometry(a: GeometryArgs, out_dir: Option<&Path>) -> Result<bool> {
    let geom = a.select.build()?;
    let content = match a.format {
        Format::Text => {
            let mut s = String::new();
            for p in geom.positions() {
                s.push_str(&format!("{p}\n"));
            }
            s
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&GeometryRecord::from_geometry(&geom))?;
            s.push('\n');
            s
        }
    };
    emit(resolve_out(a.out, out_dir), &content)?;
    Ok(true)
}

fn cmd_coarray(a: CoarrayArgs, out_dir: Option<&Path>) -> Result<bool> {
    let geom = a.select.build()?;
    let profile = difference_coarray(&geom);
    let mut s = String::new();
    s.push_str(&format!("array: {} (Q = {}", geom.label(), geom.sensor_count()));
    if let Some(m) = geom.max_ies() {
        s.push_str(&format!(", M = {m}"));
    }
    s.push_str(")\n");
    let positions: Vec<String> = geom.positions().iter().map(u32::to_string).collect();
    s.push_str(&format!("positions: {}\n", positions.join(" ")));
    s.push_str(&format!("aperture: {}\n", geom.aperture()));
    s.push_str(&format!(
        "consecutive lags: [-{l}, {l}]  (uDOF = {u})\n",
        l = profile.consecutive_bound,
        u = profile.udof
    ));
    let [w1, w2, w3] = profile.w123();
    s.push_str(&format!("w(1), w(2), w(3): {w1}, {w2}, {w3}\n"));
    let holes: Vec<i64> = (1..=profile.aperture())
        .filter(|l| !profile.weights.contains_key(l))
        .collect();
    if holes.is_empty() {
        s.push_str("holes: none\n");
    } else {
        let shown: Vec<String> = holes.iter().take(12).map(i64::to_string).collect();
        let suffix = if holes.len() > 12 {
            format!(" (+{} more)", holes.len() - 12)
        } else {
            String::new()
        };
        s.push_str(&format!("holes (positive side): {}{}\n", shown.join(" "), suffix));
    }
    emit(resolve_out(a.out, out_dir), &s)?;
    Ok(true)
}

fn parse_kinds(arrays: &[String]) -> Result<Vec<ArrayKind>> {
    arrays
        .iter()
        .map(|s| s.parse::<ArrayKind>().map_err(Into::into))
        .collect()
}

fn sensor_counts(a: &SweepUdofArgs) -> Result<Vec<u32>> {
    let mut qs = match &a.qs {
        Some(qs) => qs.clone(),
        None => {
            if a.q_step == 0 || a.q_start > a.q_end {
                bail!("need q_start <= q_end and a positive q_step");
            }
            (a.q_start..=a.q_end).step_by(a.q_step as usize).collect()
        }
    };
    if qs.is_empty() {
        bail!("empty sensor-count range");
    }
    qs.sort_unstable();
    qs.dedup();
    Ok(qs)
}

fn cmd_sweep_udof(a: SweepUdofArgs, out_dir: Option<&Path>) -> Result<bool> {
    let kinds = parse_kinds(&a.arrays)?;
    let qs = sensor_counts(&a)?;
    let rows = udof_sweep(&kinds, &qs);
    let mut csv = String::from("array,q,udof,params\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.array,
            r.q,
            r.udof.map_or(String::new(), |v| v.to_string()),
            csv_field(&r.params)
        ));
    }
    emit(resolve_out(a.out, out_dir), &csv)?;
    Ok(true)
}

fn cmd_sweep_leakage(a: SweepLeakageArgs, out_dir: Option<&Path>) -> Result<bool> {
    let kinds = parse_kinds(&a.sweep.arrays)?;
    let qs = sensor_counts(&a.sweep)?;
    let a1 = coarray_core::num_complex::Complex64::from_polar(
        a.a1_mag,
        a.a1_phase_deg.to_radians(),
    );
    let model = CouplingModel::new(a1, a.band)?;
    let rows = leakage_sweep(&kinds, &qs, &model);
    let mut csv = String::from("array,q,leakage,params\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.array,
            r.q,
            r.leakage.map_or(String::new(), |v| format!("{v:.9}")),
            csv_field(&r.params)
        ));
    }
    emit(resolve_out(a.sweep.out, out_dir), &csv)?;
    Ok(true)
}

/// Default sweep values per axis, mirroring the published figures.
fn default_values(axis: SweepAxis) -> Vec<f64> {
    match axis {
        SweepAxis::Snr => vec![-10.0, -5.0, 0.0, 5.0, 10.0],
        SweepAxis::Coupling => vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        SweepAxis::Snapshots => vec![100.0, 200.0, 400.0, 700.0, 1000.0],
    }
}

/// Published scenario presets; the snapshot count (1000) and trial count
/// (500) are the full-scale defaults and may be overridden for desk scale.
fn preset_base(preset: AxisArg) -> (Scenario, SweepSpec) {
    let axis = SweepAxis::from(preset);
    let scenario = match preset {
        AxisArg::Snr => Scenario::default(),
        AxisArg::Coupling => Scenario { q: 35, sources: 50, snr_db: 0.0, ..Scenario::default() },
        AxisArg::Snapshots => Scenario { q: 37, sources: 45, snr_db: 0.0, ..Scenario::default() },
    };
    (scenario, SweepSpec { axis, values: default_values(axis) })
}

fn rmse_csv(points: &[SweepPoint]) -> String {
    let mut csv = String::from("sweep_value,rmse_deg,failed_trials\n");
    for p in points {
        csv.push_str(&format!(
            "{},{},{}\n",
            p.sweep_value,
            p.rmse_deg.map_or("nan".to_string(), |v| format!("{v:.6}")),
            p.failed_trials
        ));
    }
    csv
}

fn cmd_rmse(a: RmseArgs, out_dir: Option<&Path>) -> Result<bool> {
    let (mut scenario, mut sweep) = preset_base(a.preset);

    if let Some(path) = &a.config {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: ConfigFile = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        cfg.apply(&mut scenario);
        if let Some(s) = cfg.sweep {
            sweep = s;
        }
    }

    if let Some(axis) = a.axis {
        let axis = SweepAxis::from(axis);
        if axis != sweep.axis {
            sweep = SweepSpec { axis, values: default_values(axis) };
        }
    }
    if let Some(values) = a.values {
        sweep.values = values;
    }

    macro_rules! override_flag {
        ($($flag:ident => $field:ident),+ $(,)?) => {
            $(if let Some(v) = a.$flag.clone() { scenario.$field = v; })+
        };
    }
    override_flag!(
        array => array, q => q, sources => sources, snapshots => snapshots, trials => trials,
        snr_db => snr_db, a1_mag => a1_mag, a1_phase_deg => a1_phase_deg, band => coupling_band,
        seed => seed, field_min_deg => field_min_deg, field_max_deg => field_max_deg,
    );
    if let Some(v) = a.grid_min_deg {
        scenario.grid.min_deg = v;
    }
    if let Some(v) = a.grid_max_deg {
        scenario.grid.max_deg = v;
    }
    if let Some(v) = a.grid_step_deg {
        scenario.grid.step_deg = v;
    }

    let report = run_rmse_sweep(&scenario, &sweep)?;
    emit(resolve_out(a.out, out_dir), &rmse_csv(&report.points))?;
    Ok(true)
}

fn load_geometry_file(path: &Path) -> Result<Vec<u32>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('{') {
        let rec: GeometryRecord = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        Ok(rec.positions)
    } else {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.parse::<u32>()
                    .with_context(|| format!("bad position line {l:?} in {}", path.display()))
            })
            .collect()
    }
}

fn cmd_verify(a: VerifyArgs, out_dir: Option<&Path>) -> Result<bool> {
    let mut report = String::new();
    let mut all_pass = true;

    if let Some(path) = &a.geometry {
        let q = a.expect_imisc.expect("clap enforces the pairing");
        let positions = load_geometry_file(path)?;
        let check = verify_geometry_against_imisc(q, &positions)?;
        report.push_str(&check.render());
        all_pass &= check.passed();
    } else {
        if matches!(a.suite, Suite::Formulas | Suite::All) {
            let formulas = verify_formulas(a.q_start, a.q_end)?;
            report.push_str(&formulas.render());
            all_pass &= formulas.passed();
        }
        if matches!(a.suite, Suite::Crossdiff | Suite::All) {
            for &q in &a.qs {
                let coverage = verify_coverage(q)?;
                report.push_str(&coverage.render());
                all_pass &= coverage.passed();
            }
        }
    }

    report.push_str(if all_pass { "verify: PASS\n" } else { "verify: FAIL\n" });
    emit(resolve_out(a.out, out_dir), &report)?;
    Ok(all_pass)
}
