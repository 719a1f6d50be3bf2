//! Reference configurators: exhaustive phase sweep and the genie oracle.

use crate::error::{Error, Result};
use crate::mobility::ChannelState;
use crate::ris::{optimal_config, RisConfiguration};
use crate::wavefield::LinkGeometry;

/// Uniform sweep of the second-element phase over `[0, 360)` degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSpec {
    pub resolution_deg: f64,
}

impl SweepSpec {
    pub fn new(resolution_deg: f64) -> Result<Self> {
        let s = SweepSpec { resolution_deg };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution_deg > 0.0 && self.resolution_deg <= 360.0) {
            return Err(Error::InvalidArgument(format!(
                "sweep resolution must lie in (0, 360] degrees, got {}",
                self.resolution_deg
            )));
        }
        Ok(())
    }

    /// Probes (and downlink training slots) per sweep.
    pub fn slot_cost(&self) -> usize {
        let q = 360.0 / self.resolution_deg;
        let r = q.round();
        if (q - r).abs() < 1e-9 {
            r as usize
        } else {
            q.ceil() as usize
        }
    }

    /// Second-element phases visited, radians.
    pub fn phases(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.slot_cost()).map(move |i| (i as f64 * self.resolution_deg).to_radians())
    }
}

/// Probe every linear-law configuration `phi_n = n phi_2` on the sweep grid
/// and keep the strongest. The first maximum wins ties.
pub fn exhaustive_sweep<F>(
    mut probe: F,
    sweep: &SweepSpec,
    geom: &LinkGeometry,
) -> Result<(RisConfiguration, usize)>
where
    F: FnMut(&RisConfiguration) -> f64,
{
    sweep.validate()?;
    let mut best: Option<(RisConfiguration, f64)> = None;
    let mut used = 0;
    for phi2 in sweep.phases() {
        let config = RisConfiguration::linear(phi2, geom.n_ris, 0);
        let rss = probe(&config);
        used += 1;
        if best.as_ref().is_none_or(|(_, b)| rss > *b) {
            best = Some((config, rss));
        }
    }
    let (config, _) = best.ok_or(Error::EmptyGrid)?;
    Ok((config, used))
}

/// Genie configuration from the true angle of departure; costs no slots.
pub fn oracle_config(channel: &ChannelState, geom: &LinkGeometry) -> RisConfiguration {
    optimal_config(geom.theta1, channel.theta2, geom)
}
