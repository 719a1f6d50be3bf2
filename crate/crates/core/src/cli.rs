//! Scenario files, run orchestration and CSV/summary emission.
//!
//! A scenario is a TOML document with four optional tables. Every key has a
//! default, so an empty file is a valid scenario:
//!
//! ```toml
//! [geometry]
//! n_tx = 16
//! n_ris = 64
//! theta1_deg = 45.0
//! r1 = 4.0
//! snr_db = 10.0
//!
//! [trajectory]
//! theta2_init_deg = 20.0
//! r2_init = 4.0
//! psi_a_deg = 110.0
//! speed_v = 0.6
//! path_length = 1.0
//!
//! [tracker]
//! algorithms = ["proposed", "exhaustive", "oracle"]
//! gamma = 0.9
//! gamma_exh = 0.5
//! resolutions_deg = [1.0, 5.0, 10.0]
//!
//! [run]
//! seeds = [1, 2, 3]
//! output_dir = "out"
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Deserialize;

use crate::baselines::SweepSpec;
use crate::error::{Error, Result};
use crate::mobility::{
    generate_path, BetaInit, ChannelState, SegmentSpec, TrajectorySpec, WalkDirection,
};
use crate::simengine::{
    overhead_report, rate_error_vs, run_timeline, NoiseModel, RunMetrics, SlotRecord,
    ThresholdMode, TimelineParams, Tracker,
};
use crate::tracking::{PhaseResidual, RssErrorForm, SearchGrid};
use crate::wavefield::{LinkGeometry, DEFAULT_WAVELENGTH};

pub const OUTPUT_DIR_ENV: &str = "RISTRACK_OUTPUT_DIR";
pub const SCHEMA_VERSION: u32 = 1;
pub const LEDGER_HEADER: &str =
    "slot_index,kind,rss,rss_normalized,inst_rate,cum_rate,status_id,config_id,theta2_true_deg";

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    geometry: RawGeometry,
    trajectory: RawTrajectory,
    tracker: RawTracker,
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawGeometry {
    n_tx: usize,
    n_ris: usize,
    spacing_d: Option<f64>,
    wavelength: f64,
    theta1_deg: f64,
    phi_ap_deg: f64,
    r1: f64,
    alpha_re: f64,
    alpha_im: f64,
    snr_db: f64,
    noise_var: f64,
}

impl Default for RawGeometry {
    fn default() -> Self {
        RawGeometry {
            n_tx: 16,
            n_ris: 64,
            spacing_d: None,
            wavelength: DEFAULT_WAVELENGTH,
            theta1_deg: 45.0,
            phi_ap_deg: 0.0,
            r1: 4.0,
            alpha_re: 1.0,
            alpha_im: 0.0,
            snr_db: 10.0,
            noise_var: 1.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawTrajectory {
    theta2_init_deg: f64,
    r2_init: f64,
    psi_a_deg: f64,
    speed_v: f64,
    slot_duration_t0: f64,
    path_length: f64,
    direction: String,
    beta: String,
    beta_scale: f64,
    beta_re: f64,
    beta_im: f64,
    segments: Vec<RawSegment>,
}

impl Default for RawTrajectory {
    fn default() -> Self {
        RawTrajectory {
            theta2_init_deg: 20.0,
            r2_init: 4.0,
            psi_a_deg: 110.0,
            speed_v: 0.6,
            slot_duration_t0: 15.6e-6,
            path_length: 1.0,
            direction: "increasing".into(),
            beta: "rayleigh".into(),
            beta_scale: std::f64::consts::FRAC_1_SQRT_2,
            beta_re: 1.0,
            beta_im: 0.0,
            segments: Vec::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    psi_a_deg: f64,
    path_length: f64,
    #[serde(default = "default_direction")]
    direction: String,
}

fn default_direction() -> String {
    "increasing".into()
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawTracker {
    algorithms: Vec<String>,
    gamma: f64,
    gamma_exh: f64,
    threshold_mode: String,
    resolutions_deg: Vec<f64>,
    theta2_halfwidth_deg: f64,
    theta2_step_deg: f64,
    r_halfwidth: f64,
    r_step: Option<f64>,
    n_sol: usize,
    rss_error: String,
    phase_residual: String,
    averaging: usize,
}

impl Default for RawTracker {
    fn default() -> Self {
        RawTracker {
            algorithms: vec!["proposed".into(), "exhaustive".into(), "oracle".into()],
            gamma: 0.9,
            gamma_exh: 0.5,
            threshold_mode: "normalized".into(),
            resolutions_deg: vec![1.0, 5.0, 10.0],
            theta2_halfwidth_deg: 2.5,
            theta2_step_deg: 0.05,
            r_halfwidth: 0.005,
            r_step: None,
            n_sol: 7,
            rss_error: "unsquared".into(),
            phase_residual: "unwrapped".into(),
            averaging: 1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawRun {
    seeds: Vec<u64>,
    output_dir: String,
    noise: String,
}

impl Default for RawRun {
    fn default() -> Self {
        RawRun {
            seeds: vec![1],
            output_dir: "out".into(),
            noise: "awgn".into(),
        }
    }
}

/// A fully validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub geometry: LinkGeometry,
    /// First segment; `rng_seed` is replaced by each run seed.
    pub trajectory: TrajectorySpec,
    pub segments: Vec<SegmentSpec>,
    pub trackers: Vec<Tracker>,
    pub params: TimelineParams,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub noisy: bool,
}

impl ScenarioConfig {
    pub fn noise_for(&self, seed: u64) -> NoiseModel {
        if self.noisy {
            NoiseModel::Awgn { seed }
        } else {
            NoiseModel::Noiseless
        }
    }

    pub fn trajectory_for(&self, seed: u64) -> Result<Vec<ChannelState>> {
        let spec = TrajectorySpec {
            rng_seed: seed,
            ..self.trajectory.clone()
        };
        generate_path(&spec, &self.segments, &self.geometry)
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        load_config_str("", Path::new("<default>"), &[]).expect("defaults are valid")
    }
}

/// One-based line of a byte offset.
fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Line where `key` is set inside `[section]`, falling back to the section
/// header and then to line 1.
fn locate(src: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header_line = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            if current == section && header_line.is_none() {
                header_line = Some(i + 1);
            }
            continue;
        }
        let in_section = current == section || current.starts_with(&format!("{section}."));
        if in_section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return i + 1;
                }
            }
        }
    }
    header_line.unwrap_or(1)
}

struct Checker<'a> {
    src: &'a str,
    path: &'a Path,
}

impl Checker<'_> {
    fn fail(&self, section: &str, key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            path: self.path.to_path_buf(),
            line: locate(self.src, section, key),
            message: format!("{section}.{key}: {}", message.into()),
        }
    }

    fn require(
        &self,
        ok: bool,
        section: &str,
        key: &str,
        message: impl Into<String>,
    ) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.fail(section, key, message))
        }
    }

    fn wrap(&self, section: &str, res: Result<()>) -> Result<()> {
        res.map_err(|e| Error::Config {
            path: self.path.to_path_buf(),
            line: locate(self.src, section, "\u{0}"),
            message: format!("[{section}] {e}"),
        })
    }
}

fn parse_direction(s: &str) -> Option<WalkDirection> {
    match s {
        "increasing" => Some(WalkDirection::Increasing),
        "decreasing" => Some(WalkDirection::Decreasing),
        _ => None,
    }
}

/// Read and validate a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_config_str(&src, path, &[])
}

/// Parse and validate scenario text. `overrides` are dotted keys such as
/// `trajectory.speed_v` applied on top of the file.
pub fn load_config_str(
    src: &str,
    path: &Path,
    overrides: &[(String, toml::Value)],
) -> Result<ScenarioConfig> {
    let parse_err = |e: toml::de::Error| Error::Config {
        path: path.to_path_buf(),
        line: e.span().map(|s| line_of(src, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    };
    let mut raw: RawConfig = toml::from_str(src).map_err(parse_err)?;
    if !overrides.is_empty() {
        let mut table: toml::Table = toml::from_str(src).map_err(parse_err)?;
        for (key, value) in overrides {
            let (section, field) = key.split_once('.').ok_or_else(|| Error::Config {
                path: path.to_path_buf(),
                line: 1,
                message: format!("override `{key}` must be written as section.key"),
            })?;
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry.as_table_mut() {
                Some(t) => {
                    t.insert(field.to_string(), value.clone());
                }
                None => {
                    return Err(Error::Config {
                        path: path.to_path_buf(),
                        line: 1,
                        message: format!("`{section}` is not a table"),
                    })
                }
            }
        }
        raw = RawConfig::deserialize(toml::Value::Table(table)).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            line: 1,
            message: format!("override: {}", e.message()),
        })?;
    }
    build(raw, &Checker { src, path })
}

fn build(raw: RawConfig, ck: &Checker) -> Result<ScenarioConfig> {
    let g = &raw.geometry;
    let spacing_d = g.spacing_d.unwrap_or(g.wavelength / 2.0);
    ck.require(g.n_tx >= 1, "geometry", "n_tx", "must be at least 1")?;
    ck.require(g.n_ris >= 1, "geometry", "n_ris", "must be at least 1")?;
    ck.require(
        g.wavelength > 0.0,
        "geometry",
        "wavelength",
        "must be positive",
    )?;
    ck.require(spacing_d > 0.0, "geometry", "spacing_d", "must be positive")?;
    ck.require(g.r1 > 0.0, "geometry", "r1", "distance must be positive")?;
    ck.require(
        g.noise_var > 0.0,
        "geometry",
        "noise_var",
        "must be positive",
    )?;
    ck.require(
        g.theta1_deg.abs() < 90.0,
        "geometry",
        "theta1_deg",
        "must lie in (-90, 90)",
    )?;
    ck.require(g.snr_db.is_finite(), "geometry", "snr_db", "must be finite")?;
    let geometry = LinkGeometry {
        n_tx: g.n_tx,
        n_ris: g.n_ris,
        spacing_d,
        wavelength: g.wavelength,
        theta1: g.theta1_deg.to_radians(),
        phi_ap: g.phi_ap_deg.to_radians(),
        r1: g.r1,
        alpha: Complex64::new(g.alpha_re, g.alpha_im),
        snr_linear: 10f64.powf(g.snr_db / 10.0),
        noise_var: g.noise_var,
    };
    ck.wrap("geometry", geometry.validate())?;

    let t = &raw.trajectory;
    ck.require(t.speed_v > 0.0, "trajectory", "speed_v", "must be positive")?;
    ck.require(
        t.slot_duration_t0 > 0.0,
        "trajectory",
        "slot_duration_t0",
        "must be positive",
    )?;
    ck.require(
        t.path_length > 0.0,
        "trajectory",
        "path_length",
        "must be positive",
    )?;
    ck.require(
        t.r2_init > 0.0,
        "trajectory",
        "r2_init",
        "distance must be positive",
    )?;
    ck.require(
        t.theta2_init_deg.abs() < 90.0,
        "trajectory",
        "theta2_init_deg",
        "must lie in (-90, 90)",
    )?;
    let direction = parse_direction(&t.direction).ok_or_else(|| {
        ck.fail(
            "trajectory",
            "direction",
            "expected \"increasing\" or \"decreasing\"",
        )
    })?;
    let beta_init = match t.beta.as_str() {
        "rayleigh" => {
            ck.require(
                t.beta_scale > 0.0,
                "trajectory",
                "beta_scale",
                "must be positive",
            )?;
            BetaInit::Rayleigh {
                scale: t.beta_scale,
            }
        }
        "fixed" => {
            let b = Complex64::new(t.beta_re, t.beta_im);
            ck.require(
                b.norm() > 0.0,
                "trajectory",
                "beta_re",
                "fixed gain must be nonzero",
            )?;
            BetaInit::Fixed(b)
        }
        _ => return Err(ck.fail("trajectory", "beta", "expected \"rayleigh\" or \"fixed\"")),
    };
    let trajectory = TrajectorySpec {
        theta2_init: t.theta2_init_deg.to_radians(),
        r2_init: t.r2_init,
        psi_a: t.psi_a_deg.to_radians(),
        speed_v: t.speed_v,
        slot_duration_t0: t.slot_duration_t0,
        path_length: t.path_length,
        beta_init,
        rng_seed: 0,
        direction,
    };
    ck.wrap("trajectory", trajectory.validate())?;
    let mut segments = Vec::new();
    for seg in &t.segments {
        ck.require(
            seg.path_length > 0.0,
            "trajectory.segments",
            "path_length",
            "must be positive",
        )?;
        let direction = parse_direction(&seg.direction).ok_or_else(|| {
            ck.fail(
                "trajectory.segments",
                "direction",
                "expected \"increasing\" or \"decreasing\"",
            )
        })?;
        segments.push(SegmentSpec {
            psi_a: seg.psi_a_deg.to_radians(),
            path_length: seg.path_length,
            direction,
        });
    }

    let k = &raw.tracker;
    let threshold_mode = match k.threshold_mode.as_str() {
        "normalized" => ThresholdMode::Normalized,
        "absolute" => ThresholdMode::Absolute,
        _ => {
            return Err(ck.fail(
                "tracker",
                "threshold_mode",
                "expected \"normalized\" or \"absolute\"",
            ))
        }
    };
    for (key, value) in [("gamma", k.gamma), ("gamma_exh", k.gamma_exh)] {
        ck.require(
            value > 0.0 && value.is_finite(),
            "tracker",
            key,
            "threshold must be positive",
        )?;
        if threshold_mode == ThresholdMode::Normalized {
            ck.require(
                value <= 1.0,
                "tracker",
                key,
                format!(
                    "{value} exceeds 1; a normalized threshold is a fraction of the reference RSS"
                ),
            )?;
        }
    }
    ck.require(
        k.averaging >= 1,
        "tracker",
        "averaging",
        "must be at least 1",
    )?;
    let params = TimelineParams {
        gamma: k.gamma,
        gamma_exh: k.gamma_exh,
        threshold_mode,
        averaging: k.averaging,
    };

    ck.require(
        k.n_sol >= 1,
        "tracker",
        "n_sol",
        "candidate set must hold at least one pair",
    )?;
    let rss_error = match k.rss_error.as_str() {
        "unsquared" => RssErrorForm::Unsquared,
        "squared" => RssErrorForm::Squared,
        _ => {
            return Err(ck.fail(
                "tracker",
                "rss_error",
                "expected \"unsquared\" or \"squared\"",
            ))
        }
    };
    let phase_residual = match k.phase_residual.as_str() {
        "unwrapped" => PhaseResidual::Unwrapped,
        "wrapped" => PhaseResidual::Wrapped,
        _ => {
            return Err(ck.fail(
                "tracker",
                "phase_residual",
                "expected \"unwrapped\" or \"wrapped\"",
            ))
        }
    };
    let grid = SearchGrid {
        theta2_halfwidth: k.theta2_halfwidth_deg.to_radians(),
        theta2_step: k.theta2_step_deg.to_radians(),
        r_halfwidth: k.r_halfwidth,
        r_step: k.r_step.unwrap_or(geometry.wavelength / 50.0),
        n_sol: k.n_sol,
        rss_error,
        phase_residual,
    };
    ck.require(
        grid.theta2_step > 0.0,
        "tracker",
        "theta2_step_deg",
        "must be positive",
    )?;
    ck.require(grid.r_step > 0.0, "tracker", "r_step", "must be positive")?;
    ck.wrap("tracker", grid.validate())?;

    ck.require(
        !k.algorithms.is_empty(),
        "tracker",
        "algorithms",
        "at least one algorithm is required",
    )?;
    let mut trackers = Vec::new();
    for name in &k.algorithms {
        match name.as_str() {
            "proposed" => trackers.push(Tracker::Proposed(grid)),
            "oracle" => trackers.push(Tracker::Oracle),
            "exhaustive" => {
                ck.require(
                    !k.resolutions_deg.is_empty(),
                    "tracker",
                    "resolutions_deg",
                    "exhaustive search needs at least one resolution",
                )?;
                for &res in &k.resolutions_deg {
                    let sweep = SweepSpec::new(res)
                        .map_err(|e| ck.fail("tracker", "resolutions_deg", e.to_string()))?;
                    trackers.push(Tracker::Exhaustive(sweep));
                }
            }
            other => {
                return Err(ck.fail(
                    "tracker",
                    "algorithms",
                    format!(
                        "unknown algorithm \"{other}\" (expected proposed, exhaustive or oracle)"
                    ),
                ))
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    trackers.retain(|t| seen.insert(t.label()));

    let r = &raw.run;
    ck.require(
        !r.seeds.is_empty(),
        "run",
        "seeds",
        "at least one seed is required",
    )?;
    let noisy = match r.noise.as_str() {
        "awgn" => true,
        "none" => false,
        _ => return Err(ck.fail("run", "noise", "expected \"awgn\" or \"none\"")),
    };
    Ok(ScenarioConfig {
        geometry,
        trajectory,
        segments,
        trackers,
        params,
        seeds: r.seeds.clone(),
        output_dir: PathBuf::from(&r.output_dir),
        noisy,
    })
}

/// Twelve significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

/// Slot ledger with the versioned column schema.
pub fn ledger_csv(records: &[SlotRecord], metrics: &RunMetrics) -> String {
    let mut out = String::with_capacity(records.len() * 120);
    out.push_str(LEDGER_HEADER);
    out.push('\n');
    for (r, cum) in records.iter().zip(&metrics.cumulative_rate_series) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.slot_index,
            r.kind.as_str(),
            fmt_float(r.rss),
            fmt_float(r.rss_normalized),
            fmt_float(r.inst_rate),
            fmt_float(*cum),
            r.status_id,
            r.config_id,
            fmt_float(r.theta2_true.to_degrees()),
        );
    }
    out
}

pub fn cumulative_csv(records: &[SlotRecord], metrics: &RunMetrics) -> String {
    let mut out = String::from("slot_index,theta2_true_deg,inst_rate,cum_rate\n");
    for (r, cum) in records.iter().zip(&metrics.cumulative_rate_series) {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.slot_index,
            fmt_float(r.theta2_true.to_degrees()),
            fmt_float(r.inst_rate),
            fmt_float(*cum),
        );
    }
    out
}

/// Outcome of one (tracker, seed) run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub label: String,
    pub seed: u64,
    pub metrics: RunMetrics,
}

const SUMMARY_COLUMNS: [&str; 9] = [
    "tracker",
    "seed",
    "slots",
    "pct_below_threshold",
    "tracking_calls",
    "training_slots",
    "feedback_slots",
    "final_cum_rate",
    "avg_error_vs_oracle",
];

fn summary_row(label: &str, seed: &str, m: &RunMetrics) -> Vec<String> {
    vec![
        label.to_string(),
        seed.to_string(),
        m.total_slots.to_string(),
        format!("{:.4}", m.pct_below_threshold),
        m.tracking_calls.to_string(),
        m.training_slots.to_string(),
        m.feedback_slots.to_string(),
        format!("{:.6}", m.final_cumulative_rate()),
        m.avg_error_vs_oracle
            .map_or("-".into(), |e| format!("{e:.6}")),
    ]
}

fn table(rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = SUMMARY_COLUMNS.iter().map(|c| c.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = format!("# ristrack summary, schema v{SCHEMA_VERSION}\n");
    let header: Vec<String> = SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect();
    for row in std::iter::once(&header).chain(rows) {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Per-tracker means over seeds, in the order trackers first appear.
pub fn aggregate(outcomes: &[RunOutcome]) -> Vec<(String, RunMetrics)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<&RunMetrics>> = BTreeMap::new();
    for o in outcomes {
        if !groups.contains_key(&o.label) {
            order.push(o.label.clone());
        }
        groups.entry(o.label.clone()).or_default().push(&o.metrics);
    }
    order
        .into_iter()
        .map(|label| {
            let ms = &groups[&label];
            let n = ms.len() as f64;
            let mean = |f: &dyn Fn(&RunMetrics) -> f64| ms.iter().map(|m| f(m)).sum::<f64>() / n;
            let final_rate = mean(&|m| m.final_cumulative_rate());
            let errs: Vec<f64> = ms.iter().filter_map(|m| m.avg_error_vs_oracle).collect();
            let m = RunMetrics {
                cumulative_rate_series: vec![final_rate],
                pct_below_threshold: mean(&|m| m.pct_below_threshold),
                tracking_calls: mean(&|m| m.tracking_calls as f64).round() as usize,
                avg_error_vs_oracle: (errs.len() == ms.len()).then(|| errs.iter().sum::<f64>() / n),
                training_slots: mean(&|m| m.training_slots as f64).round() as usize,
                feedback_slots: mean(&|m| m.feedback_slots as f64).round() as usize,
                below_threshold_slots: mean(&|m| m.below_threshold_slots as f64).round() as usize,
                total_slots: mean(&|m| m.total_slots as f64).round() as usize,
            };
            (label, m)
        })
        .collect()
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Run every (tracker, seed) pair and write the artifacts into
/// `config.output_dir`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<RunOutcome>> {
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let per_seed: Vec<(u64, Vec<ChannelState>, Vec<SlotRecord>)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let traj = config.trajectory_for(seed)?;
            let oracle = run_timeline(
                &traj,
                &Tracker::Oracle,
                &config.params,
                &config.geometry,
                config.noise_for(seed),
            )?;
            Ok((seed, traj, oracle))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(&Tracker, usize)> = config
        .trackers
        .iter()
        .flat_map(|t| (0..per_seed.len()).map(move |i| (t, i)))
        .collect();

    let outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(tracker, i)| {
            let (seed, traj, oracle) = &per_seed[i];
            let records = match tracker {
                Tracker::Oracle => oracle.clone(),
                _ => run_timeline(
                    traj,
                    tracker,
                    &config.params,
                    &config.geometry,
                    config.noise_for(*seed),
                )?,
            };
            let mut metrics = overhead_report(&records, config.params.threshold_for(tracker));
            metrics.avg_error_vs_oracle = Some(rate_error_vs(&records, oracle));
            let label = tracker.label();
            let stem = format!("{label}_seed{seed}");
            write(
                &out.join(format!("{stem}_slots.csv")),
                &ledger_csv(&records, &metrics),
            )?;
            write(
                &out.join(format!("{stem}_cumrate.csv")),
                &cumulative_csv(&records, &metrics),
            )?;
            write(
                &out.join(format!("{stem}_summary.txt")),
                &table(&[summary_row(&label, &seed.to_string(), &metrics)]),
            )?;
            Ok(RunOutcome {
                label,
                seed: *seed,
                metrics,
            })
        })
        .collect::<Result<_>>()?;

    let rows: Vec<Vec<String>> = aggregate(&outcomes)
        .iter()
        .map(|(label, m)| summary_row(label, &format!("mean/{}", config.seeds.len()), m))
        .collect();
    write(&out.join("summary.txt"), &table(&rows))?;
    // drop the bulky per-slot series from the returned outcomes
    Ok(outcomes
        .into_iter()
        .map(|mut o| {
            let last = o.metrics.final_cumulative_rate();
            o.metrics.cumulative_rate_series = vec![last];
            o
        })
        .collect())
}

/// Parse `key=v1,v2,...`.
pub fn parse_vary(spec: &str) -> Result<(String, Vec<toml::Value>)> {
    let bad = || {
        Error::InvalidArgument(format!(
            "--vary expects section.key=v1,v2,..., got `{spec}`"
        ))
    };
    let (key, values) = spec.split_once('=').ok_or_else(bad)?;
    let key = key.trim();
    if key.is_empty() || !key.contains('.') {
        return Err(bad());
    }
    let values: Vec<toml::Value> = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            toml::from_str::<toml::Table>(&format!("v = {v}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(v.to_string()))
        })
        .collect();
    if values.is_empty() {
        return Err(bad());
    }
    Ok((key.to_string(), values))
}

fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Run the scenario once per value of `key`, each into its own
/// subdirectory, and write `sweep.csv` with per-tracker means.
pub fn run_sweep(
    src: &str,
    path: &Path,
    key: &str,
    values: &[toml::Value],
    output_override: Option<&Path>,
) -> Result<PathBuf> {
    let mut base_out = None;
    let mut csv = String::from(
        "param,value,tracker,seeds,pct_below_threshold,tracking_calls,final_cum_rate,avg_error_vs_oracle\n",
    );
    for value in values {
        let mut config = load_config_str(src, path, &[(key.to_string(), value.clone())])?;
        if let Some(o) = output_override {
            config.output_dir = o.to_path_buf();
        }
        let root = config.output_dir.clone();
        let label = value_label(value);
        let sub: String = format!("{key}={label}")
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || "._=-".contains(c) {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        config.output_dir = root.join(sub);
        let outcomes = run_scenario(&config)?;
        for (tracker, m) in aggregate(&outcomes) {
            let _ = writeln!(
                csv,
                "{key},{label},{tracker},{},{},{},{},{}",
                config.seeds.len(),
                fmt_float(m.pct_below_threshold),
                outcomes
                    .iter()
                    .filter(|o| o.label == tracker)
                    .map(|o| o.metrics.tracking_calls)
                    .sum::<usize>() as f64
                    / config.seeds.len() as f64,
                fmt_float(m.final_cumulative_rate()),
                m.avg_error_vs_oracle.map_or(String::new(), fmt_float),
            );
        }
        base_out = Some(root);
    }
    let root = base_out.ok_or_else(|| Error::InvalidArgument("sweep has no values".into()))?;
    let file = root.join("sweep.csv");
    write(&file, &csv)?;
    Ok(file)
}

/// Process exit code for an error: 1 for configuration problems, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::InvalidArgument(_) => 1,
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 1,
        _ => 2,
    }
}

/// Output directory after the environment override.
pub fn output_override() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}
