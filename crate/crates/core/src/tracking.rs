//! Fast beam tracking from two feedback observables.
//!
//! At a status transition the UE reports the RSS ratio `eta` and the
//! differential received phase `xi` between the status reference sample and
//! the current sample. The AP then searches a grid of angle-of-departure
//! candidates around its belief; for each candidate the coherent gain fixes
//! a distance estimate from `eta`, and a fine distance sweep around it scores
//! how well the pair explains both observables. The lowest-error candidates
//! are tried over the air and the strongest one is kept.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::ris::{coherent_gain, update_config, wrap_principal, RisConfiguration};
use crate::wavefield::{ComplexSample, LinkGeometry, DEFAULT_WAVELENGTH};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackingObservables {
    /// RSS ratio, current over reference.
    pub eta: f64,
    /// Differential received phase in `(-pi, pi]`.
    pub xi: f64,
    pub rss_ref: f64,
    /// Believed total propagation distance `r1 + r2` at the reference slot.
    pub r_ref: f64,
    /// Believed angle of departure the active configuration is steered to.
    pub theta2_ref: f64,
}

pub fn measure_observables(
    y_ref: ComplexSample,
    y_now: ComplexSample,
    r_ref: f64,
    theta2_ref: f64,
) -> Result<TrackingObservables> {
    let rss_ref = y_ref.rss();
    if !(rss_ref > 0.0) {
        return Err(Error::ZeroReference);
    }
    let rss_now = y_now.rss();
    // eta must stay positive for the distance estimate
    let eta = (rss_now / rss_ref).max(f64::MIN_POSITIVE);
    let xi = wrap_principal(y_now.phase() - y_ref.phase());
    Ok(TrackingObservables {
        eta,
        xi,
        rss_ref,
        r_ref,
        theta2_ref,
    })
}

/// Distance implied by the RSS ratio for a candidate gain magnitude,
/// `r_ref |N'| / (sqrt(eta) N)`.
pub fn r_from_eta(obs: &TrackingObservables, gain_mag: f64, n_ris: usize) -> f64 {
    obs.r_ref * gain_mag / (obs.eta.sqrt() * n_ris as f64)
}

/// Form of the RSS-ratio residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RssErrorForm {
    /// `|(r_ref / r)^2 |N'| / N - eta|`
    #[default]
    Unsquared,
    /// `|(r_ref / r)^2 |N'|^2 / N^2 - eta|`, consistent with how `eta` is generated.
    Squared,
}

/// Treatment of the phase residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PhaseResidual {
    /// Absolute residual of the unwrapped travel phase. Distances far from the
    /// reference accumulate phase and are penalised.
    #[default]
    Unwrapped,
    /// Principal-value residual; every distance within one wavelength can
    /// cancel the phase, so only the RSS term separates candidates.
    Wrapped,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchGrid {
    pub theta2_halfwidth: f64,
    pub theta2_step: f64,
    pub r_halfwidth: f64,
    pub r_step: f64,
    /// Size of the candidate set trained over the air.
    pub n_sol: usize,
    pub rss_error: RssErrorForm,
    pub phase_residual: PhaseResidual,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid::for_wavelength(DEFAULT_WAVELENGTH)
    }
}

impl SearchGrid {
    pub fn for_wavelength(wavelength: f64) -> Self {
        SearchGrid {
            theta2_halfwidth: 2.5f64.to_radians(),
            theta2_step: 0.05f64.to_radians(),
            r_halfwidth: 0.005,
            r_step: wavelength / 50.0,
            n_sol: 7,
            rss_error: RssErrorForm::default(),
            phase_residual: PhaseResidual::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.theta2_halfwidth > 0.0 && self.theta2_step > 0.0) {
            return bad("theta2 search width and step must be positive");
        }
        if !(self.r_halfwidth > 0.0 && self.r_step > 0.0) {
            return bad("r search width and step must be positive");
        }
        if self.theta2_step > self.theta2_halfwidth {
            return bad("theta2 step exceeds the half-width");
        }
        if self.r_step > self.r_halfwidth {
            return bad("r step exceeds the half-width");
        }
        if self.n_sol == 0 {
            return bad("candidate set size must be at least 1");
        }
        Ok(())
    }

    fn offsets(halfwidth: f64, step: f64) -> Vec<f64> {
        let k = (halfwidth / step + 1e-9).floor() as i64;
        (-k..=k).map(|i| i as f64 * step).collect()
    }

    pub fn theta2_offsets(&self) -> Vec<f64> {
        Self::offsets(self.theta2_halfwidth, self.theta2_step)
    }

    pub fn r_offsets(&self) -> Vec<f64> {
        Self::offsets(self.r_halfwidth, self.r_step)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidatePair {
    pub theta2_cand: f64,
    /// `sin(theta2_cand) - sin(theta2_ref)`.
    pub w_cand: f64,
    pub r_cand: f64,
    pub error_total: f64,
    pub error_rss: f64,
    pub error_angle: f64,
}

struct Residuals {
    rss: f64,
    angle: f64,
}

fn residuals(
    obs: &TrackingObservables,
    xi: f64,
    gain_ratio: f64,
    gain_phase: f64,
    r: f64,
    wavelength: f64,
    grid: &SearchGrid,
) -> Residuals {
    let loss = (obs.r_ref / r).powi(2);
    let shape = match grid.rss_error {
        RssErrorForm::Unsquared => gain_ratio,
        RssErrorForm::Squared => gain_ratio * gain_ratio,
    };
    let rss = (loss * shape - obs.eta).abs();
    let phase = TAU / wavelength * (r - obs.r_ref) + gain_phase - xi;
    let angle = match grid.phase_residual {
        PhaseResidual::Unwrapped => phase.abs(),
        PhaseResidual::Wrapped => wrap_principal(phase).abs(),
    };
    Residuals { rss, angle }
}

fn by_error(a: &CandidatePair, b: &CandidatePair) -> Ordering {
    a.error_total
        .total_cmp(&b.error_total)
        .then(a.w_cand.abs().total_cmp(&b.w_cand.abs()))
}

/// Grid search over (theta2, r); returns at most `n_sol` candidates with
/// distinct angles, ordered by total error.
pub fn two_dim_search(
    obs: &TrackingObservables,
    grid: &SearchGrid,
    geom: &LinkGeometry,
) -> Result<Vec<CandidatePair>> {
    grid.validate()?;
    let n = geom.n_ris as f64;
    let xi = wrap_principal(obs.xi);
    let r_offsets = grid.r_offsets();
    let sin_ref = obs.theta2_ref.sin();

    let mut best: Vec<CandidatePair> = Vec::new();
    for dtheta in grid.theta2_offsets() {
        let theta2 = obs.theta2_ref + dtheta;
        if theta2.abs() >= PI / 2.0 {
            continue;
        }
        let w = theta2.sin() - sin_ref;
        let gain = coherent_gain(w, geom.n_ris, geom.spacing_d, geom.wavelength);
        let (mag, phase) = (gain.magnitude(), gain.phase());
        let r_cal = r_from_eta(obs, mag, geom.n_ris);

        let mut pick: Option<CandidatePair> = None;
        for dr in &r_offsets {
            let r = r_cal + dr;
            if !(r > 0.0) || !r.is_finite() {
                continue;
            }
            let res = residuals(obs, xi, mag / n, phase, r, geom.wavelength, grid);
            let total = res.rss + res.angle;
            if pick.is_none_or(|p| total < p.error_total) {
                pick = Some(CandidatePair {
                    theta2_cand: theta2,
                    w_cand: w,
                    r_cand: r,
                    error_total: total,
                    error_rss: res.rss,
                    error_angle: res.angle,
                });
            }
        }
        best.extend(pick);
    }
    if best.is_empty() {
        return Err(Error::EmptyGrid);
    }
    best.sort_by(by_error);
    best.truncate(grid.n_sol);
    Ok(best)
}

/// Train each candidate's configuration once via `probe` and keep the one with
/// the highest measured RSS. Ties go to the smaller `|w|`, then the earlier
/// candidate.
pub fn select_by_training<F>(
    candidates: &[CandidatePair],
    mut probe: F,
    current: &RisConfiguration,
    geom: &LinkGeometry,
) -> Result<(RisConfiguration, CandidatePair)>
where
    F: FnMut(&RisConfiguration) -> f64,
{
    let mut winner: Option<(RisConfiguration, CandidatePair, f64)> = None;
    for cand in candidates {
        let config = update_config(current, cand.w_cand, geom);
        let rss = probe(&config);
        let better = match &winner {
            None => true,
            Some((_, best, best_rss)) => {
                rss > *best_rss || (rss == *best_rss && cand.w_cand.abs() < best.w_cand.abs())
            }
        };
        if better {
            winner = Some((config, *cand, rss));
        }
    }
    winner
        .map(|(c, p, _)| (c, p))
        .ok_or_else(|| Error::InvalidArgument("no candidates to train".into()))
}
