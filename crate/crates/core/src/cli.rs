//! Command-line front end: `simulate`, `measure`, `fit`, `scale` and `report`,
//! plus `sweep`, which runs the whole pipeline over a grid of configurations.
//!
//! Every artifact gets a `<artifact>.manifest.toml` sidecar holding the
//! resolved configuration. Manifests store file names only, so they are
//! byte-stable across output directories.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{ControlConfig, ControlLaw, DEFAULT_CANDIDATES};
use crate::error::{Error, Result};
use crate::fd::{
    self, FdFit, FdPoint, FilterConfig, FitDocument, ScaleFactors, ScaledFd, SummaryBasis,
    DEFAULT_ENVELOPE_QUANTILE,
};
use crate::io::{self, PlotKind, PlotRow};
use crate::measure::{self, AreaMode, MeasureConfig, SampleRecord};
use crate::scenario::{ScenarioConfig, ScenarioKind};
use crate::sim::{self, ReplayReport, SimConfig};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "UAMFD_OUT_DIR";
pub const MANIFEST_SUFFIX: &str = ".manifest.toml";
/// Model evaluations appended to plot data.
pub const PLOT_CURVE_POINTS: usize = 200;

pub const SAMPLES_FILE: &str = "samples.csv";
pub const FIT_FILE: &str = "fit.toml";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

fn out_or_default(out: &Option<PathBuf>, name: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| default_out_dir().join(name))
}

/// `<artifact>.manifest.toml`
pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(MANIFEST_SUFFIX);
    PathBuf::from(s)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

/// Scale factors together with the summary basis they were applied to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSettings {
    pub basis: SummaryBasis,
    pub delta_eta: f64,
    pub delta_v: f64,
}

/// Resolved configuration and artifact names behind one output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope_quantile: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            envelope_quantile: None,
            simulation: None,
            measure: None,
            filter: None,
            scale: None,
            sweep: None,
        }
    }

    /// Writes the sidecar of `artifact` and returns its path.
    pub fn write_for(&self, artifact: &Path) -> Result<PathBuf> {
        let path = manifest_path(artifact);
        io::write_toml(self, &path)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        io::read_toml(path)
    }
}

fn parse_law(s: &str) -> std::result::Result<ControlLaw, String> {
    ControlLaw::from_short_name(s).ok_or_else(|| format!("expected `stop` or `detour`, got `{s}`"))
}

fn parse_basis(s: &str) -> std::result::Result<SummaryBasis, String> {
    match s {
        "empirical" => Ok(SummaryBasis::Empirical),
        "analytic" => Ok(SummaryBasis::Analytic),
        _ => Err(format!("expected `empirical` or `analytic`, got `{s}`")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "uamfd", version, about = "Spherical drone-traffic simulation and fundamental-diagram calibration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one run and write its trajectory CSV.
    Simulate(SimulateArgs),
    /// Measure Edie flow and density per cell from trajectory files.
    Measure(MeasureArgs),
    /// Filter samples and fit Drake's model.
    Fit(FitArgs),
    /// Scale a fit to another vehicle size and cruise speed.
    Scale(ScaleArgs),
    /// Tabulate the fits of a sweep directory.
    Report(ReportArgs),
    /// Run simulate, measure, fit and report over a configuration grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Number of drones.
    #[arg(long, default_value_t = 4)]
    pub drones: usize,
    /// 1 random, 2 zoned, 3 stations.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub scenario: u8,
    /// `stop` (stop-and-yield) or `detour` (circular detour).
    #[arg(long, default_value = "stop", value_parser = parse_law)]
    pub control: ControlLaw,
    /// Safe spacing (m).
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub spacing: f64,
    /// Time step (s).
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub dt: f64,
    /// Cruise speed (m/s).
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub speed: f64,
    /// Sphere radius (m).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub radius: f64,
    /// Simulated time (s).
    #[arg(long, default_value_t = 50.0, allow_negative_numbers = true)]
    pub duration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sampled detour angles.
    #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
    pub candidates: usize,
    /// Take the configuration from a manifest or configuration TOML instead.
    #[arg(long, conflicts_with_all = [
        "drones", "scenario", "control", "spacing", "dt", "speed", "radius", "duration", "seed", "candidates",
    ])]
    pub config: Option<PathBuf>,
    /// Trajectory CSV [default: $UAMFD_OUT_DIR/trajectory.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replay the run and fail on any safety violation.
    #[arg(long)]
    pub check: bool,
}

impl SimulateArgs {
    pub fn sim_config(&self) -> Result<SimConfig> {
        let cfg = match &self.config {
            Some(path) => load_sim_config(path)?,
            None => {
                if !(self.dt > 0.0 && self.duration > 0.0) {
                    return Err(Error::config("--dt and --duration must be positive"));
                }
                let kind = ScenarioKind::from_number(self.scenario)
                    .ok_or_else(|| Error::config(format!("unknown scenario {}", self.scenario)))?;
                let mut scenario = ScenarioConfig::new(kind, self.drones, self.seed);
                scenario.radius = self.radius;
                let mut control = ControlConfig::new(self.control, self.spacing);
                control.n_candidates = self.candidates;
                SimConfig {
                    dt: self.dt,
                    n_steps: (self.duration / self.dt).round() as usize,
                    cruise_speed: self.speed,
                    scenario,
                    control,
                }
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads a [`SimConfig`] from a run manifest or from a bare configuration TOML.
pub fn load_sim_config(path: &Path) -> Result<SimConfig> {
    if let Ok(RunManifest { simulation: Some(cfg), .. }) = io::read_toml::<RunManifest>(path) {
        return Ok(cfg);
    }
    io::read_toml(path)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulateOutcome {
    pub n_records: usize,
    pub replay: Option<ReplayReport>,
}

/// Runs one simulation and writes the trajectory and its manifest.
pub fn simulate(cfg: &SimConfig, out: &Path, check: bool) -> Result<SimulateOutcome> {
    let records = sim::run(cfg)?;
    let replay = if check {
        let report = sim::replay_check(&records, cfg)?;
        if report.violations() > 0 {
            return Err(Error::integrity(out.display().to_string(), format!("replay check failed: {report:?}")));
        }
        Some(report)
    } else {
        None
    };
    ensure_parent(out)?;
    io::write_trajectory(&records, out)?;
    let mut manifest = RunManifest::new("simulate");
    manifest.outputs.push(file_name(out));
    manifest.simulation = Some(cfg.clone());
    manifest.write_for(out)?;
    Ok(SimulateOutcome { n_records: records.len(), replay })
}

#[derive(Debug, Clone, Args)]
pub struct MeasureArgs {
    /// Trajectory CSVs, comma separated; each is measured on its own.
    #[arg(long = "in", value_delimiter = ',', required = true)]
    pub inputs: Vec<PathBuf>,
    /// Angular bins per dimension; the sphere gets mbar² cells.
    #[arg(long, default_value_t = 7)]
    pub mbar: usize,
    /// Seconds dropped from the start of each file.
    #[arg(long, default_value_t = 15.0, allow_negative_numbers = true)]
    pub trim_start: f64,
    /// Seconds dropped from the end of each file.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub trim_end: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub radius: f64,
    /// Use the mean cell area instead of each cell's exact area.
    #[arg(long)]
    pub mean_area: bool,
    /// Samples CSV [default: $UAMFD_OUT_DIR/samples.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl MeasureArgs {
    pub fn measure_config(&self) -> Result<MeasureConfig> {
        let cfg = MeasureConfig {
            m_bar: self.mbar,
            radius: self.radius,
            dt: self.dt,
            trim_start: self.trim_start,
            trim_end: self.trim_end,
            area_mode: if self.mean_area { AreaMode::Mean } else { AreaMode::Exact },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn with_file_context(path: &Path, e: Error) -> Error {
    match e {
        Error::DataIntegrity { location, reason } if !location.starts_with(&path.display().to_string()) => {
            Error::integrity(format!("{}: {location}", path.display()), reason)
        }
        other => other,
    }
}

/// Measures one trajectory file; samples are tagged with the file stem.
pub fn measure_file(path: &Path, cfg: &MeasureConfig) -> Result<Vec<SampleRecord>> {
    let records = io::read_trajectory(path, cfg.dt, cfg.radius)?;
    let m = measure::accumulate(&records, cfg).map_err(|e| with_file_context(path, e))?;
    let run = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(m.samples.iter().map(|s| SampleRecord::new(s, run.clone())).collect())
}

/// Measures each file independently and concatenates the samples.
pub fn measure_files(inputs: &[PathBuf], cfg: &MeasureConfig, out: &Path) -> Result<Vec<SampleRecord>> {
    let mut samples = Vec::new();
    for path in inputs {
        samples.extend(measure_file(path, cfg)?);
    }
    ensure_parent(out)?;
    io::write_csv(&samples, out)?;
    let mut manifest = RunManifest::new("measure");
    manifest.inputs = inputs.iter().map(|p| file_name(p)).collect();
    manifest.outputs.push(file_name(out));
    manifest.measure = Some(cfg.clone());
    manifest.write_for(out)?;
    Ok(samples)
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Samples CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Equal-width density bins.
    #[arg(long, default_value_t = fd::DEFAULT_BINS)]
    pub bins: usize,
    /// Flow percentile kept in each bin, in [0, 100].
    #[arg(long, default_value_t = fd::DEFAULT_PERCENTILE, allow_negative_numbers = true)]
    pub percentile: f64,
    /// Density quantile bounding the free-flow envelope, in (0, 1].
    #[arg(long, default_value_t = DEFAULT_ENVELOPE_QUANTILE)]
    pub envelope_quantile: f64,
    /// Fit document [default: $UAMFD_OUT_DIR/fit.toml].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write retained points and the fitted curve as CSV.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

/// A fit with the samples it used.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub fit: FdFit,
    pub document: FitDocument,
    pub retained: Vec<FdPoint>,
    /// Every sample with positive density.
    pub nonzero: Vec<FdPoint>,
}

/// Drops empty cells, filters and fits. The envelope slope is computed on all
/// nonzero samples and left out when it is undefined.
pub fn fit_points(points: &[FdPoint], filter: &FilterConfig, envelope_quantile: f64) -> Result<FitOutcome> {
    let nonzero: Vec<FdPoint> = points.iter().copied().filter(|p| p.k > 0.0).collect();
    let retained = fd::percentile_filter(&nonzero, filter)?;
    let fit = fd::fit_drake(&retained)?;
    let mut document = FitDocument::new(&fit, filter, points.len(), nonzero.len());
    document.envelope_slope = fd::envelope_slope(&nonzero, envelope_quantile).ok();
    Ok(FitOutcome { fit, document, retained, nonzero })
}

/// Retained points followed by [`PLOT_CURVE_POINTS`] evaluations over `[0, max k]`.
pub fn plot_rows(outcome: &FitOutcome) -> Vec<PlotRow> {
    let k_max = outcome.retained.iter().map(|p| p.k).fold(0.0, f64::max);
    let points = outcome.retained.iter().map(|p| PlotRow { kind: PlotKind::Point, k: p.k, q: p.q });
    let curve = (0..PLOT_CURVE_POINTS).map(|i| {
        let k = k_max * i as f64 / (PLOT_CURVE_POINTS - 1) as f64;
        PlotRow { kind: PlotKind::Curve, k, q: outcome.fit.eval(k) }
    });
    points.chain(curve).collect()
}

/// Fits a samples CSV and writes the fit document, its manifest and
/// optionally plot data. `m̄` and trims are echoed from the samples manifest.
pub fn fit_file(
    input: &Path,
    filter: &FilterConfig,
    envelope_quantile: f64,
    out: &Path,
    plot_data: Option<&Path>,
) -> Result<FitOutcome> {
    let samples: Vec<SampleRecord> = io::read_csv(input)?;
    if samples.is_empty() {
        return Err(Error::integrity(input.display().to_string(), "no samples"));
    }
    let points: Vec<FdPoint> = samples.iter().map(SampleRecord::point).collect();
    let mut outcome = fit_points(&points, filter, envelope_quantile)?;
    let source = manifest_path(input);
    let measure_cfg = if source.exists() { RunManifest::read(&source)?.measure } else { None };
    if let Some(m) = &measure_cfg {
        outcome.document.mbar = Some(m.m_bar);
        outcome.document.trim_start = Some(m.trim_start);
        outcome.document.trim_end = Some(m.trim_end);
    }
    outcome.document.manifest = Some(file_name(&manifest_path(out)));

    ensure_parent(out)?;
    io::write_toml(&outcome.document, out)?;
    let mut manifest = RunManifest::new("fit");
    manifest.inputs.push(file_name(input));
    manifest.outputs.push(file_name(out));
    if let Some(p) = plot_data {
        ensure_parent(p)?;
        io::write_csv(&plot_rows(&outcome), p)?;
        manifest.outputs.push(file_name(p));
    }
    manifest.envelope_quantile = Some(envelope_quantile);
    manifest.measure = measure_cfg;
    manifest.filter = Some(*filter);
    manifest.write_for(out)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Args)]
pub struct ScaleArgs {
    /// Fit document to scale.
    #[arg(long)]
    pub fd: PathBuf,
    /// Reference vehicle size (m).
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub size_from: f64,
    /// Target vehicle size (m).
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub size_to: f64,
    /// Reference cruise speed (m/s).
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub speed_from: f64,
    /// Target cruise speed (m/s).
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub speed_to: f64,
    /// `empirical` or `analytic` critical density and capacity.
    #[arg(long, default_value = "empirical", value_parser = parse_basis)]
    pub basis: SummaryBasis,
    /// Scaled fit document; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Adds the scaled block to a fit document.
pub fn scale_document(doc: &FitDocument, factors: ScaleFactors, basis: SummaryBasis) -> FitDocument {
    let scaled = ScaledFd { basis, factors, summary: doc.summary(basis).scale(factors) };
    doc.clone().with_scaled(&scaled)
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Sweep directory holding one sub-directory per configuration.
    #[arg(long)]
    pub dir: PathBuf,
    /// Directory for report.csv and report.txt [default: --dir].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One calibrated configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigKey {
    pub scenario: ScenarioKind,
    pub law: ControlLaw,
    /// Safe spacing in millimetres, so keys order and compare exactly.
    pub spacing_mm: u32,
}

impl ConfigKey {
    pub fn new(scenario: ScenarioKind, law: ControlLaw, spacing: f64) -> Result<Self> {
        let mm = (spacing * 1000.0).round();
        if !(spacing > 0.0) || (mm / 1000.0 - spacing).abs() > 1e-9 || mm > u32::MAX as f64 {
            return Err(Error::config(format!("spacing {spacing} must be a positive whole number of millimetres")));
        }
        Ok(Self { scenario, law, spacing_mm: mm as u32 })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing_mm as f64 / 1000.0
    }

    /// `scenario{S}_{stop|detour}_h{spacing}`
    pub fn dir_name(&self) -> String {
        format!("scenario{}_{}_h{}", self.scenario.number(), self.law.short_name(), self.spacing())
    }

    pub fn parse_dir_name(name: &str) -> Option<Self> {
        let rest = name.strip_prefix("scenario")?;
        let (s, rest) = rest.split_once('_')?;
        let (law, h) = rest.split_once("_h")?;
        let key = Self::new(
            ScenarioKind::from_number(s.parse().ok()?)?,
            ControlLaw::from_short_name(law)?,
            h.parse().ok()?,
        )
        .ok()?;
        (key.dir_name() == name).then_some(key)
    }

    fn sort_key(&self) -> (u8, ControlLaw, u32) {
        (self.scenario.number(), self.law, self.spacing_mm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: u8,
    pub control: String,
    pub spacing: f64,
    pub n_samples_used: usize,
    pub v_f: f64,
    pub k_c_empirical: f64,
    pub q_max_empirical: f64,
    pub k_c_analytic: f64,
    pub q_max_analytic: f64,
    pub r2: f64,
    pub rmse: f64,
}

impl ReportRow {
    pub fn new(key: &ConfigKey, doc: &FitDocument) -> Self {
        Self {
            scenario: key.scenario.number(),
            control: key.law.short_name().to_string(),
            spacing: key.spacing(),
            n_samples_used: doc.n_samples_used,
            v_f: doc.v_f,
            k_c_empirical: doc.k_c_empirical,
            q_max_empirical: doc.q_max_empirical,
            k_c_analytic: doc.k_c_analytic,
            q_max_analytic: doc.q_max_analytic,
            r2: doc.r2,
            rmse: doc.rmse,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    /// Configuration directories without a readable fit document.
    pub missing: Vec<String>,
}

/// Collects the fit document of every configuration directory under `dir`.
pub fn build_report(dir: &Path) -> Result<Report> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if !entry.path().is_dir() {
            continue;
        }
        if let Some(key) = ConfigKey::parse_dir_name(&entry.file_name().to_string_lossy()) {
            found.push((key, entry.path()));
        }
    }
    found.sort_by_key(|(k, _)| k.sort_key());
    let mut report = Report::default();
    for (key, path) in found {
        let fit = path.join(FIT_FILE);
        match io::read_toml::<FitDocument>(&fit) {
            Ok(doc) => report.rows.push(ReportRow::new(&key, &doc)),
            Err(_) => report.missing.push(format!("{}/{}", key.dir_name(), FIT_FILE)),
        }
    }
    Ok(report)
}

const REPORT_COLUMNS: [&str; 11] = [
    "scenario", "control", "spacing", "n_samples_used", "v_f", "k_c_empirical", "q_max_empirical",
    "k_c_analytic", "q_max_analytic", "r2", "rmse",
];

/// Aligned plain-text rendering of a report.
pub fn format_report_text(report: &Report) -> String {
    let cells: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![r.scenario.to_string(), r.control.clone(), r.spacing.to_string(), r.n_samples_used.to_string()];
            v.extend(
                [r.v_f, r.k_c_empirical, r.q_max_empirical, r.k_c_analytic, r.q_max_analytic, r.r2, r.rmse]
                    .iter()
                    .map(|x| format!("{x:.4}")),
            );
            v
        })
        .collect();
    let widths: Vec<usize> = (0..REPORT_COLUMNS.len())
        .map(|c| cells.iter().map(|row| row[c].len()).chain([REPORT_COLUMNS[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, row: Vec<&str>| {
        let padded: Vec<String> = row.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&mut out, REPORT_COLUMNS.to_vec());
    for row in &cells {
        line(&mut out, row.iter().map(String::as_str).collect());
    }
    if report.rows.is_empty() {
        out.push_str("(no configurations found)\n");
    }
    for m in &report.missing {
        let _ = writeln!(out, "missing: {m}");
    }
    out
}

/// Writes `report.csv` and `report.txt` into `out_dir`.
pub fn write_report(report: &Report, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let csv_path = out_dir.join(REPORT_CSV);
    let csv = if report.rows.is_empty() {
        format!("{}\n", REPORT_COLUMNS.join(","))
    } else {
        io::format_csv(&report.rows)?
    };
    io::write_atomic(&csv_path, csv.as_bytes())?;
    let txt_path = out_dir.join(REPORT_TXT);
    io::write_atomic(&txt_path, format_report_text(report).as_bytes())?;
    Ok((csv_path, txt_path))
}

/// The reference protocol grid: each configuration pools every fleet size
/// and replication into one sample cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub seed: u64,
    pub replications: usize,
    pub scenarios: Vec<u8>,
    pub drones: Vec<usize>,
    pub stop_spacings: Vec<f64>,
    pub detour_spacings: Vec<f64>,
    pub dt: f64,
    pub duration: f64,
    pub cruise_speed: f64,
    pub radius: f64,
    pub n_candidates: usize,
    pub envelope_quantile: f64,
    pub measure: MeasureConfig,
    pub filter: FilterConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let mut measure = MeasureConfig::new(7, 0.1, 15.0);
        measure.radius = 1.0;
        Self {
            seed: 0,
            replications: 4,
            scenarios: vec![1, 2, 3],
            drones: vec![2, 4, 6, 8],
            stop_spacings: vec![0.5, 0.6],
            detour_spacings: vec![0.6, 0.7],
            dt: 0.1,
            duration: 50.0,
            cruise_speed: 0.5,
            radius: 1.0,
            n_candidates: DEFAULT_CANDIDATES,
            envelope_quantile: DEFAULT_ENVELOPE_QUANTILE,
            measure,
            filter: FilterConfig::default(),
        }
    }
}

/// Seed of one (scenario, fleet size, replication) run. Control law and
/// spacing are left out so every configuration sees the same flight plans.
pub fn replication_seed(base: u64, scenario: u8, n_drones: usize, rep: usize) -> u64 {
    let mut z = base;
    for part in [scenario as u64, n_drones as u64, rep as u64] {
        z = splitmix64(z ^ part);
    }
    z
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SweepConfig {
    pub fn configurations(&self) -> Result<Vec<ConfigKey>> {
        let mut keys = Vec::new();
        for &s in &self.scenarios {
            let kind = ScenarioKind::from_number(s).ok_or_else(|| Error::config(format!("unknown scenario {s}")))?;
            for &h in &self.stop_spacings {
                keys.push(ConfigKey::new(kind, ControlLaw::StopAndYield, h)?);
            }
            for &h in &self.detour_spacings {
                keys.push(ConfigKey::new(kind, ControlLaw::CircularDetour, h)?);
            }
        }
        Ok(keys)
    }

    pub fn sim_config(&self, key: &ConfigKey, n_drones: usize, rep: usize) -> SimConfig {
        let seed = replication_seed(self.seed, key.scenario.number(), n_drones, rep);
        let mut scenario = ScenarioConfig::new(key.scenario, n_drones, seed);
        scenario.radius = self.radius;
        let mut control = ControlConfig::new(key.law, key.spacing());
        control.n_candidates = self.n_candidates;
        SimConfig {
            dt: self.dt,
            n_steps: (self.duration / self.dt).round() as usize,
            cruise_speed: self.cruise_speed,
            scenario,
            control,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 || self.drones.is_empty() {
            return Err(Error::config("a sweep needs at least one fleet size and one replication"));
        }
        if (self.measure.dt - self.dt).abs() > 1e-12 || (self.measure.radius - self.radius).abs() > 1e-12 {
            return Err(Error::config("measurement dt and radius must match the simulation"));
        }
        self.measure.validate()?;
        for key in self.configurations()? {
            for &n in &self.drones {
                self.sim_config(&key, n, 0).validate()?;
            }
        }
        Ok(())
    }

    pub fn n_trajectories(&self) -> usize {
        self.scenarios.len()
            * (self.stop_spacings.len() + self.detour_spacings.len())
            * self.drones.len()
            * self.replications
    }
}

pub fn trajectory_name(n_drones: usize, rep: usize) -> String {
    format!("I{n_drones}_rep{rep}.csv")
}

/// Outcome of one sweep configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigResult {
    pub key: ConfigKey,
    pub samples: Vec<SampleRecord>,
    /// Fit and filtered cloud, or why fitting failed.
    pub fit: std::result::Result<FitOutcome, fd::FitError>,
    /// Summed replay report when checking was requested.
    pub replay: Option<ReplayReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub results: Vec<ConfigResult>,
    pub report: Report,
}

fn merge_replay(total: &mut ReplayReport, r: &ReplayReport) {
    total.checked_steps += r.checked_steps;
    total.yield_violations += r.yield_violations;
    total.approach_violations += r.approach_violations;
    total.replay_mismatches += r.replay_mismatches;
    total.displacement_violations += r.displacement_violations;
    total.max_sphere_deviation = total.max_sphere_deviation.max(r.max_sphere_deviation);
}

/// Simulates, measures and fits one configuration inside `dir`.
pub fn run_config(cfg: &SweepConfig, key: &ConfigKey, dir: &Path, check: bool) -> Result<ConfigResult> {
    let cdir = dir.join(key.dir_name());
    fs::create_dir_all(&cdir).map_err(|e| Error::io(&cdir, e))?;
    let mut inputs = Vec::new();
    let mut replay = check.then(ReplayReport::default);
    for &n in &cfg.drones {
        for rep in 0..cfg.replications {
            let path = cdir.join(trajectory_name(n, rep));
            let out = simulate(&cfg.sim_config(key, n, rep), &path, false)?;
            if let Some(total) = replay.as_mut() {
                let records = io::read_trajectory(&path, cfg.dt, cfg.radius)?;
                merge_replay(total, &sim::replay_check(&records, &cfg.sim_config(key, n, rep))?);
            }
            debug_assert!(out.n_records > 0);
            inputs.push(path);
        }
    }
    let samples_path = cdir.join(SAMPLES_FILE);
    let samples = measure_files(&inputs, &cfg.measure, &samples_path)?;
    let fit_path = cdir.join(FIT_FILE);
    let fit = match fit_file(&samples_path, &cfg.filter, cfg.envelope_quantile, &fit_path, None) {
        Ok(o) => Ok(o),
        Err(Error::Fit(e)) => {
            // a stale document from an earlier run must not survive
            let _ = fs::remove_file(&fit_path);
            Err(e)
        }
        Err(e) => return Err(e),
    };
    Ok(ConfigResult { key: *key, samples, fit, replay })
}

/// Runs every configuration (in parallel) and writes the report.
pub fn run_sweep(cfg: &SweepConfig, dir: &Path, check: bool) -> Result<SweepOutcome> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let keys = cfg.configurations()?;
    let results: Vec<ConfigResult> = keys
        .par_iter()
        .map(|key| {
            let r = run_config(cfg, key, dir, check);
            if let Ok(r) = &r {
                let status = match &r.fit {
                    Ok(o) => format!("v_f = {:.3}, q_max = {:.3}", o.fit.v_f, o.fit.q_max_empirical),
                    Err(e) => format!("fit failed: {e}"),
                };
                eprintln!("{}: {status}", key.dir_name());
            }
            r
        })
        .collect::<Result<_>>()?;
    let mut manifest = RunManifest::new("sweep");
    manifest.sweep = Some(cfg.clone());
    manifest.outputs = vec![REPORT_CSV.to_string(), REPORT_TXT.to_string()];
    io::write_toml(&manifest, &dir.join(format!("sweep{MANIFEST_SUFFIX}")))?;
    let report = build_report(dir)?;
    write_report(&report, dir)?;
    Ok(SweepOutcome { results, report })
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Output directory [default: $UAMFD_OUT_DIR/sweep].
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Take the sweep settings from a manifest or configuration TOML.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub replications: usize,
    #[arg(long, default_value = "1,2,3", value_delimiter = ',')]
    pub scenarios: Vec<u8>,
    #[arg(long, default_value = "2,4,6,8", value_delimiter = ',')]
    pub drones: Vec<usize>,
    #[arg(long, default_value = "0.5,0.6", value_delimiter = ',')]
    pub stop_spacings: Vec<f64>,
    #[arg(long, default_value = "0.6,0.7", value_delimiter = ',')]
    pub detour_spacings: Vec<f64>,
    #[arg(long, default_value_t = 50.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 7)]
    pub mbar: usize,
    #[arg(long, default_value_t = 15.0)]
    pub trim_start: f64,
    #[arg(long, default_value_t = fd::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = fd::DEFAULT_PERCENTILE)]
    pub percentile: f64,
    /// Replay every trajectory and fail on any safety violation.
    #[arg(long)]
    pub check: bool,
}

impl SweepArgs {
    pub fn sweep_config(&self) -> Result<SweepConfig> {
        if let Some(path) = &self.config {
            if let Ok(RunManifest { sweep: Some(cfg), .. }) = io::read_toml::<RunManifest>(path) {
                return Ok(cfg);
            }
            return io::read_toml(path);
        }
        let mut cfg = SweepConfig {
            seed: self.seed,
            replications: self.replications,
            scenarios: self.scenarios.clone(),
            drones: self.drones.clone(),
            stop_spacings: self.stop_spacings.clone(),
            detour_spacings: self.detour_spacings.clone(),
            duration: self.duration,
            filter: FilterConfig { n_bins: self.bins, percentile: self.percentile },
            ..SweepConfig::default()
        };
        cfg.measure.m_bar = self.mbar;
        cfg.measure.trim_start = self.trim_start;
        Ok(cfg)
    }
}

fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => {
            let cfg = args.sim_config()?;
            let out = out_or_default(&args.out, "trajectory.csv");
            let o = simulate(&cfg, &out, args.check)?;
            eprintln!("wrote {} records to {}", o.n_records, out.display());
        }
        Command::Measure(args) => {
            let cfg = args.measure_config()?;
            let out = out_or_default(&args.out, SAMPLES_FILE);
            let samples = measure_files(&args.inputs, &cfg, &out)?;
            eprintln!("wrote {} samples to {}", samples.len(), out.display());
        }
        Command::Fit(args) => {
            let filter = FilterConfig { n_bins: args.bins, percentile: args.percentile };
            let out = out_or_default(&args.out, FIT_FILE);
            let o = fit_file(&args.input, &filter, args.envelope_quantile, &out, args.plot_data.as_deref())?;
            eprintln!(
                "v_f = {:.4}, alpha = {:.4}, r2 = {:.3} on {} samples; wrote {}",
                o.fit.v_f,
                o.fit.alpha,
                o.fit.r2,
                o.fit.n_samples_used,
                out.display()
            );
        }
        Command::Scale(args) => {
            let factors = ScaleFactors::from_reference(args.size_from, args.size_to, args.speed_from, args.speed_to)
                .map_err(|e| Error::config(e.to_string()))?;
            let doc: FitDocument = io::read_toml(&args.fd)?;
            let mut scaled = scale_document(&doc, factors, args.basis);
            match &args.out {
                Some(out) => {
                    scaled.manifest = Some(file_name(&manifest_path(out)));
                    ensure_parent(out)?;
                    io::write_toml(&scaled, out)?;
                    let mut manifest = RunManifest::new("scale");
                    manifest.inputs.push(file_name(&args.fd));
                    manifest.outputs.push(file_name(out));
                    manifest.scale = Some(ScaleSettings {
                        basis: args.basis,
                        delta_eta: factors.delta_eta,
                        delta_v: factors.delta_v,
                    });
                    manifest.write_for(out)?;
                }
                None => print!("{}", toml::to_string(&scaled).map_err(|e| Error::config(e.to_string()))?),
            }
        }
        Command::Report(args) => {
            let report = build_report(&args.dir)?;
            if report.rows.is_empty() {
                eprintln!("warning: no configuration fits found under {}", args.dir.display());
            }
            for m in &report.missing {
                eprintln!("warning: missing {m}");
            }
            let out = args.out.clone().unwrap_or_else(|| args.dir.clone());
            write_report(&report, &out)?;
            print!("{}", format_report_text(&report));
        }
        Command::Sweep(args) => {
            let cfg = args.sweep_config()?;
            let dir = args.dir.clone().unwrap_or_else(|| default_out_dir().join("sweep"));
            let outcome = run_sweep(&cfg, &dir, args.check)?;
            print!("{}", format_report_text(&outcome.report));
            let mut failed = None;
            for r in &outcome.results {
                if let Err(e) = &r.fit {
                    eprintln!("warning: {}: {e}", r.key.dir_name());
                    failed.get_or_insert_with(|| e.clone());
                }
                if let Some(rep) = &r.replay {
                    if rep.violations() > 0 {
                        return Err(Error::integrity(r.key.dir_name(), format!("replay check failed: {rep:?}")));
                    }
                }
            }
            if let Some(e) = failed {
                return Err(Error::Fit(e));
            }
        }
    }
    Ok(())
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}
