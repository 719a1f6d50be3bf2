//! Ground-truth user walk and the per-slot RIS-UE channel.
//!
//! The user starts at point A, seen from the RIS at distance `r2_init` and
//! angle of departure `theta2_init`, and walks in a straight line. `psi_a` is
//! the interior angle at A between the direction back to the RIS and the
//! direction of travel, so distance and angle follow from the law of cosines
//! on the triangle RIS, A, UE. The complex gain evolves by a path-loss ratio
//! and a travel-distance phase rotation each slot.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::wavefield::LinkGeometry;

/// Tolerance for `acos` arguments that overshoot `[-1, 1]` by rounding.
const ACOS_TOLERANCE: f64 = 1e-9;

/// Which way the angle of departure moves as the user walks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WalkDirection {
    #[default]
    Increasing,
    Decreasing,
}

impl WalkDirection {
    fn sign(self) -> f64 {
        match self {
            WalkDirection::Increasing => 1.0,
            WalkDirection::Decreasing => -1.0,
        }
    }
}

/// How the initial complex gain is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaInit {
    /// Rayleigh magnitude with the given scale and uniform phase, drawn from
    /// the trajectory seed.
    Rayleigh {
        scale: f64,
    },
    Fixed(Complex64),
}

impl Default for BetaInit {
    fn default() -> Self {
        BetaInit::Rayleigh {
            scale: FRAC_1_SQRT_2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySpec {
    pub theta2_init: f64,
    pub r2_init: f64,
    pub psi_a: f64,
    /// Walking speed, m/s.
    pub speed_v: f64,
    /// Slot duration, seconds.
    pub slot_duration_t0: f64,
    /// Length of the straight segment |AB|, meters.
    pub path_length: f64,
    pub beta_init: BetaInit,
    pub rng_seed: u64,
    pub direction: WalkDirection,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec {
            theta2_init: 20f64.to_radians(),
            r2_init: 4.0,
            psi_a: 110f64.to_radians(),
            speed_v: 0.6,
            slot_duration_t0: 15.6e-6,
            path_length: 1.0,
            beta_init: BetaInit::default(),
            rng_seed: 0,
            direction: WalkDirection::Increasing,
        }
    }
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidTrajectory(msg));
        if !(self.speed_v > 0.0) {
            return bad(format!("speed must be positive, got {}", self.speed_v));
        }
        if !(self.slot_duration_t0 > 0.0) {
            return bad(format!(
                "slot duration must be positive, got {}",
                self.slot_duration_t0
            ));
        }
        if !(self.path_length > 0.0) {
            return bad(format!(
                "path length must be positive, got {}",
                self.path_length
            ));
        }
        if !(self.r2_init > 0.0) {
            return bad(format!(
                "initial RIS-UE distance must be positive, got {}",
                self.r2_init
            ));
        }
        if !(self.theta2_init.abs() < PI / 2.0) {
            return bad("initial angle of departure must lie in (-90, 90) degrees".into());
        }
        if !(0.0..=PI).contains(&self.psi_a) {
            return bad("walking angle psi_a must lie in [0, 180] degrees".into());
        }
        if let BetaInit::Rayleigh { scale } = self.beta_init {
            if !(scale > 0.0) {
                return bad("Rayleigh scale must be positive".into());
            }
        }
        if let BetaInit::Fixed(beta) = self.beta_init {
            if !(beta.norm() > 0.0) {
                return bad("initial gain must be non-zero".into());
            }
        }
        Ok(())
    }

    /// Distance covered during one slot, `v t0`.
    pub fn step_length(&self) -> f64 {
        self.speed_v * self.slot_duration_t0
    }

    /// Distance travelled from A at slot `t` (slot 1 sits at A).
    pub fn travelled(&self, t: usize) -> f64 {
        self.step_length() * (t as f64 - 1.0)
    }
}

/// RIS-UE channel during one slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelState {
    pub beta: Complex64,
    pub theta2: f64,
    pub r2: f64,
    /// One-based slot index.
    pub slot_index: usize,
}

/// Number of slots needed to cover the path, `ceil(|AB| / (v t0))`.
pub fn slot_count(spec: &TrajectorySpec) -> usize {
    let q = spec.path_length / spec.step_length();
    let nearest = q.round();
    // an exact multiple of the step must not gain a slot from rounding
    let n = if (q - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        q.ceil()
    };
    (n as usize).max(1)
}

fn check_slot(spec: &TrajectorySpec, t: usize) -> Result<()> {
    let n = slot_count(spec);
    if t == 0 || t > n {
        return Err(Error::InvalidArgument(format!("slot {t} outside 1..={n}")));
    }
    Ok(())
}

fn distance_after(spec: &TrajectorySpec, s: f64) -> f64 {
    let r = spec.r2_init;
    (r * r + s * s - 2.0 * r * s * spec.psi_a.cos())
        .max(0.0)
        .sqrt()
}

/// RIS-UE distance at slot `t`.
pub fn r2_at(spec: &TrajectorySpec, t: usize) -> Result<f64> {
    check_slot(spec, t)?;
    Ok(distance_after(spec, spec.travelled(t)))
}

/// Angle of departure at slot `t`.
pub fn theta2_at(spec: &TrajectorySpec, t: usize) -> Result<f64> {
    check_slot(spec, t)?;
    let s = spec.travelled(t);
    let rt = distance_after(spec, s);
    theta2_from(spec, s, rt)
}

fn theta2_from(spec: &TrajectorySpec, s: f64, rt: f64) -> Result<f64> {
    if s == 0.0 {
        return Ok(spec.theta2_init);
    }
    let r = spec.r2_init;
    let arg = (r * r + rt * rt - s * s) / (2.0 * r * rt);
    if !(-1.0 - ACOS_TOLERANCE..=1.0 + ACOS_TOLERANCE).contains(&arg) {
        return Err(Error::InvalidTrajectory(format!(
            "law-of-cosines argument {arg} outside [-1, 1]"
        )));
    }
    let increment = arg.clamp(-1.0, 1.0).acos();
    Ok(spec.theta2_init + spec.direction.sign() * increment)
}

/// Advance the channel by one slot. The gain is scaled by the path-loss
/// ratio `(r1 + r2_prev) / (r1 + r2_next)` and rotated by `2 pi r_delta / lambda`.
pub fn evolve_channel(
    prev: &ChannelState,
    next_r2: f64,
    next_theta2: f64,
    wavelength: f64,
    r1: f64,
) -> Result<ChannelState> {
    if !(next_r2 > 0.0) {
        return Err(Error::InvalidTrajectory(format!(
            "RIS-UE distance must stay positive, got {next_r2}"
        )));
    }
    let r_delta = next_r2 - prev.r2;
    let rho = (r1 + prev.r2) / (r1 + next_r2);
    let rotation = Complex64::from_polar(1.0, TAU * r_delta / wavelength);
    Ok(ChannelState {
        beta: prev.beta * rho * rotation,
        theta2: next_theta2,
        r2: next_r2,
        slot_index: prev.slot_index + 1,
    })
}

/// Draw the initial gain for a spec.
pub fn initial_beta(spec: &TrajectorySpec) -> Complex64 {
    match spec.beta_init {
        BetaInit::Fixed(beta) => beta,
        BetaInit::Rayleigh { scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * scale
        }
    }
}

/// Ground-truth channel for every slot of a straight walk.
pub fn generate_trajectory(
    spec: &TrajectorySpec,
    geom: &LinkGeometry,
) -> Result<Vec<ChannelState>> {
    spec.validate()?;
    let first = ChannelState {
        beta: initial_beta(spec),
        theta2: spec.theta2_init,
        r2: spec.r2_init,
        slot_index: 1,
    };
    walk_from(spec, first, geom)
}

fn walk_from(
    spec: &TrajectorySpec,
    first: ChannelState,
    geom: &LinkGeometry,
) -> Result<Vec<ChannelState>> {
    let n = slot_count(spec);
    let mut states = Vec::with_capacity(n);
    states.push(first);
    for t in 2..=n {
        let s = spec.travelled(t);
        let r2 = distance_after(spec, s);
        let theta2 = theta2_from(spec, s, r2)?;
        let prev = states[states.len() - 1];
        states.push(evolve_channel(&prev, r2, theta2, geom.wavelength, geom.r1)?);
    }
    Ok(states)
}

/// A follow-on straight segment that starts where the previous one ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentSpec {
    pub psi_a: f64,
    pub path_length: f64,
    pub direction: WalkDirection,
}

/// Chain straight segments A -> B -> C ... Each later segment's first slot is
/// the previous segment's final state, so it is not repeated in the output.
pub fn generate_path(
    first: &TrajectorySpec,
    rest: &[SegmentSpec],
    geom: &LinkGeometry,
) -> Result<Vec<ChannelState>> {
    let mut states = generate_trajectory(first, geom)?;
    for seg in rest {
        let last = states[states.len() - 1];
        let spec = TrajectorySpec {
            theta2_init: last.theta2,
            r2_init: last.r2,
            psi_a: seg.psi_a,
            path_length: seg.path_length,
            beta_init: BetaInit::Fixed(last.beta),
            direction: seg.direction,
            ..first.clone()
        };
        spec.validate()?;
        let leg = walk_from(&spec, last, geom)?;
        states.extend_from_slice(&leg[1..]);
    }
    Ok(states)
}
