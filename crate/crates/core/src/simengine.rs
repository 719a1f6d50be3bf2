//! Slot-accurate downlink timeline with signalling accounting.
//!
//! Every slot carries exactly one kind. A status begins when a configuration
//! is installed; its reference sample is the first data slot after that. When
//! the quality metric drops below the threshold (and the previous slot was at
//! or above it) the slot is marked below-threshold and the tracker runs:
//!
//! ```text
//! t2: DATA_BELOW_THRESHOLD | UL_FEEDBACK | DL_TRAINING x k | UL_FEEDBACK | DATA ...
//! ```
//!
//! with `k = n_sol` for the proposed tracker and `360 / res` for the sweep.
//! The oracle reconfigures inside the trigger slot at no cost. The channel
//! advances every slot, signalling included.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::baselines::{exhaustive_sweep, oracle_config, SweepSpec};
use crate::error::{Error, Result};
use crate::mobility::ChannelState;
use crate::ris::{optimal_config, received_sample, RisConfiguration};
use crate::tracking::{measure_observables, select_by_training, two_dim_search, SearchGrid};
use crate::wavefield::{ComplexSample, LinkGeometry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlotKind {
    Data,
    DlTraining,
    UlFeedback,
    DataBelowThreshold,
}

impl SlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SlotKind::Data => "DATA",
            SlotKind::DlTraining => "DL_TRAINING",
            SlotKind::UlFeedback => "UL_FEEDBACK",
            SlotKind::DataBelowThreshold => "DATA_BELOW_THRESHOLD",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotRecord {
    /// One-based, equal to the channel's slot index.
    pub slot_index: usize,
    pub kind: SlotKind,
    /// Measured RSS: the data sample, or the probe on training slots. Zero on
    /// uplink slots.
    pub rss: f64,
    pub rss_normalized: f64,
    pub inst_rate: f64,
    pub config_id: u64,
    pub status_id: u64,
    pub theta2_true: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tracker {
    Proposed(SearchGrid),
    Exhaustive(SweepSpec),
    Oracle,
}

impl Tracker {
    pub fn label(&self) -> String {
        match self {
            Tracker::Proposed(_) => "proposed".to_string(),
            Tracker::Exhaustive(s) => format!("exhaustive_res{}", s.resolution_deg),
            Tracker::Oracle => "oracle".to_string(),
        }
    }

    /// Non-data slots consumed by one tracking event.
    pub fn event_cost(&self) -> usize {
        match self {
            Tracker::Proposed(grid) => grid.n_sol + 3,
            Tracker::Exhaustive(s) => s.slot_cost() + 3,
            Tracker::Oracle => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ThresholdMode {
    /// Compare RSS divided by the status reference RSS.
    #[default]
    Normalized,
    /// Compare raw RSS.
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimelineParams {
    /// Trigger threshold for the proposed tracker and the oracle.
    pub gamma: f64,
    /// Trigger threshold for the exhaustive sweep.
    pub gamma_exh: f64,
    pub threshold_mode: ThresholdMode,
    /// Noise draws averaged into each slot's sample.
    pub averaging: usize,
}

impl Default for TimelineParams {
    fn default() -> Self {
        TimelineParams {
            gamma: 0.9,
            gamma_exh: 0.5,
            threshold_mode: ThresholdMode::Normalized,
            averaging: 1,
        }
    }
}

impl TimelineParams {
    pub fn threshold_for(&self, tracker: &Tracker) -> f64 {
        match tracker {
            Tracker::Exhaustive(_) => self.gamma_exh,
            _ => self.gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("gamma", self.gamma), ("gamma_exh", self.gamma_exh)] {
            let ok = match self.threshold_mode {
                ThresholdMode::Normalized => g > 0.0 && g <= 1.0,
                ThresholdMode::Absolute => g > 0.0 && g.is_finite(),
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {g} is not a valid threshold in {:?} mode",
                    self.threshold_mode
                )));
            }
        }
        if self.averaging == 0 {
            return Err(Error::InvalidArgument(
                "averaging must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    Noiseless,
    /// Circular complex Gaussian noise with the geometry's variance.
    Awgn {
        seed: u64,
    },
}

struct NoiseSource {
    rng: Option<ChaCha8Rng>,
    sigma: f64,
    averaging: usize,
}

impl NoiseSource {
    fn new(model: NoiseModel, noise_var: f64, averaging: usize) -> Self {
        let rng = match model {
            NoiseModel::Noiseless => None,
            NoiseModel::Awgn { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                // keep noise independent of the gain draw made from the same seed
                rng.set_stream(1);
                Some(rng)
            }
        };
        NoiseSource {
            rng,
            sigma: (noise_var / 2.0).sqrt(),
            averaging,
        }
    }

    fn next(&mut self) -> Complex64 {
        let Some(rng) = self.rng.as_mut() else {
            return Complex64::new(0.0, 0.0);
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for _ in 0..self.averaging {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            acc += Complex64::new(re, im);
        }
        acc * (self.sigma / self.averaging as f64)
    }
}

/// `log2(1 + rss / noise_var)`.
pub fn instantaneous_rate(rss: f64, noise_var: f64) -> f64 {
    (1.0 + rss.max(0.0) / noise_var).log2()
}

/// Slots walked in order; each call consumes one slot and one noise draw.
struct Slots<'a> {
    trajectory: &'a [ChannelState],
    geom: &'a LinkGeometry,
    noise: NoiseSource,
    records: Vec<SlotRecord>,
    status_id: u64,
}

impl Slots<'_> {
    fn cursor(&self) -> usize {
        self.records.len()
    }

    fn exhausted(&self) -> bool {
        self.cursor() >= self.trajectory.len()
    }

    fn channel(&self) -> &ChannelState {
        &self.trajectory[self.cursor()]
    }

    fn push(&mut self, kind: SlotKind, rss: f64, rss_ref: f64, config_id: u64, noise_var: f64) {
        let ch = *self.channel();
        let inst_rate = if kind == SlotKind::Data {
            instantaneous_rate(rss, noise_var)
        } else {
            0.0
        };
        self.records.push(SlotRecord {
            slot_index: ch.slot_index,
            kind,
            rss,
            rss_normalized: normalize(rss, rss_ref),
            inst_rate,
            config_id,
            status_id: self.status_id,
            theta2_true: ch.theta2,
        });
    }

    /// One uplink feedback slot; the noise draw is still consumed so every
    /// tracker sees the same noise at the same slot index.
    fn feedback(&mut self, config_id: u64) {
        if self.exhausted() {
            return;
        }
        self.noise.next();
        self.push(SlotKind::UlFeedback, 0.0, 1.0, config_id, 1.0);
    }

    /// One downlink training slot probing `config`.
    fn probe(&mut self, config: &RisConfiguration, rss_ref: f64, active_id: u64) -> f64 {
        if self.exhausted() {
            return f64::NEG_INFINITY;
        }
        let noise = self.noise.next();
        let y = received_sample(self.channel(), config, self.geom, noise)
            .expect("probe configuration matches the surface size");
        let rss = y.rss();
        self.push(SlotKind::DlTraining, rss, rss_ref, active_id, 1.0);
        rss
    }
}

fn normalize(rss: f64, rss_ref: f64) -> f64 {
    if rss_ref > 0.0 {
        rss / rss_ref
    } else {
        0.0
    }
}

/// Run one tracker over a trajectory. The surface starts aligned to the
/// first slot's true angle, and the tracker's belief starts at the true
/// initial geometry.
pub fn run_timeline(
    trajectory: &[ChannelState],
    tracker: &Tracker,
    params: &TimelineParams,
    geom: &LinkGeometry,
    noise: NoiseModel,
) -> Result<Vec<SlotRecord>> {
    if trajectory.is_empty() {
        return Err(Error::InvalidArgument("trajectory is empty".into()));
    }
    geom.validate()?;
    params.validate()?;
    match tracker {
        Tracker::Proposed(grid) => grid.validate()?,
        Tracker::Exhaustive(sweep) => sweep.validate()?,
        Tracker::Oracle => {}
    }

    let gamma = params.threshold_for(tracker);
    let noise_var = geom.noise_var;
    let mut slots = Slots {
        trajectory,
        geom,
        noise: NoiseSource::new(noise, noise_var, params.averaging),
        records: Vec::with_capacity(trajectory.len()),
        status_id: 1,
    };

    let mut next_id = 1u64;
    let mut config = optimal_config(geom.theta1, trajectory[0].theta2, geom).with_id(0);
    let mut reference: Option<ComplexSample> = None;
    let mut belief_theta2 = trajectory[0].theta2;
    let mut belief_r = geom.r1 + trajectory[0].r2;
    let mut prev_above = true;

    while !slots.exhausted() {
        let ch = *slots.channel();
        let noise = slots.noise.next();
        let mut y = received_sample(&ch, &config, geom, noise)?;
        let y_ref = *reference.get_or_insert(y);
        let metric = |y: ComplexSample| match params.threshold_mode {
            ThresholdMode::Normalized => normalize(y.rss(), y_ref.rss()),
            ThresholdMode::Absolute => y.rss(),
        };

        let triggered = metric(y) < gamma && prev_above;
        if !triggered {
            let above = metric(y) >= gamma;
            let kind = if above {
                SlotKind::Data
            } else {
                SlotKind::DataBelowThreshold
            };
            slots.push(kind, y.rss(), y_ref.rss(), config.config_id, noise_var);
            prev_above = above;
            continue;
        }

        slots.status_id += 1;
        match tracker {
            Tracker::Oracle => {
                config = oracle_config(&ch, geom).with_id(next_id);
                next_id += 1;
                y = received_sample(&ch, &config, geom, noise)?;
                reference = Some(y);
                slots.push(
                    SlotKind::Data,
                    y.rss(),
                    y.rss(),
                    config.config_id,
                    noise_var,
                );
            }
            Tracker::Proposed(grid) => {
                slots.push(
                    SlotKind::DataBelowThreshold,
                    y.rss(),
                    y_ref.rss(),
                    config.config_id,
                    noise_var,
                );
                let active = config.config_id;
                slots.feedback(active);
                let chosen = measure_observables(y_ref, y, belief_r, belief_theta2)
                    .and_then(|obs| two_dim_search(&obs, grid, geom))
                    .and_then(|cands| {
                        select_by_training(
                            &cands,
                            |c| slots.probe(c, y_ref.rss(), active),
                            &config,
                            geom,
                        )
                    });
                slots.feedback(active);
                if let Ok((new_config, cand)) = chosen {
                    config = new_config.with_id(next_id);
                    next_id += 1;
                    belief_theta2 = cand.theta2_cand;
                    belief_r = cand.r_cand;
                }
                reference = None;
            }
            Tracker::Exhaustive(sweep) => {
                slots.push(
                    SlotKind::DataBelowThreshold,
                    y.rss(),
                    y_ref.rss(),
                    config.config_id,
                    noise_var,
                );
                let active = config.config_id;
                slots.feedback(active);
                let (new_config, _) =
                    exhaustive_sweep(|c| slots.probe(c, y_ref.rss(), active), sweep, geom)?;
                slots.feedback(active);
                config = new_config.with_id(next_id);
                next_id += 1;
                reference = None;
            }
        }
        prev_above = true;
    }
    Ok(slots.records)
}

/// Running mean of the instantaneous rate.
pub fn cumulative_rate(records: &[SlotRecord]) -> Vec<f64> {
    let rates: Vec<f64> = records.iter().map(|r| r.inst_rate).collect();
    cumulative_mean(&rates)
}

/// `R(t+1) = (t R(t) + x(t+1)) / (t + 1)`.
pub fn cumulative_mean(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (t, x) in values.iter().enumerate() {
        let t = t as f64;
        acc = (t * acc + x) / (t + 1.0);
        out.push(acc);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub cumulative_rate_series: Vec<f64>,
    pub pct_below_threshold: f64,
    pub tracking_calls: usize,
    pub avg_error_vs_oracle: Option<f64>,
    pub training_slots: usize,
    pub feedback_slots: usize,
    pub below_threshold_slots: usize,
    pub total_slots: usize,
}

impl RunMetrics {
    pub fn final_cumulative_rate(&self) -> f64 {
        self.cumulative_rate_series.last().copied().unwrap_or(0.0)
    }
}

/// Signalling and outage accounting for a finished run.
pub fn overhead_report(records: &[SlotRecord], gamma: f64) -> RunMetrics {
    let mut training = 0;
    let mut feedback = 0;
    let mut below = 0;
    let mut low_data = 0;
    for r in records {
        match r.kind {
            SlotKind::DlTraining => training += 1,
            SlotKind::UlFeedback => feedback += 1,
            SlotKind::DataBelowThreshold => below += 1,
            SlotKind::Data if r.rss_normalized < gamma => low_data += 1,
            SlotKind::Data => {}
        }
    }
    let tracking_calls = records
        .windows(2)
        .filter(|w| w[1].status_id != w[0].status_id)
        .count();
    let total = records.len();
    let flagged = training + feedback + below + low_data;
    RunMetrics {
        cumulative_rate_series: cumulative_rate(records),
        pct_below_threshold: if total > 0 {
            100.0 * flagged as f64 / total as f64
        } else {
            0.0
        },
        tracking_calls,
        avg_error_vs_oracle: None,
        training_slots: training,
        feedback_slots: feedback,
        below_threshold_slots: below,
        total_slots: total,
    }
}

/// Mean `|R_ins - R_oracle|` over the slots both runs cover.
pub fn rate_error_vs(records: &[SlotRecord], oracle: &[SlotRecord]) -> f64 {
    let n = records.len().min(oracle.len());
    if n == 0 {
        return 0.0;
    }
    records
        .iter()
        .zip(oracle)
        .map(|(a, b)| (a.inst_rate - b.inst_rate).abs())
        .sum::<f64>()
        / n as f64
}
