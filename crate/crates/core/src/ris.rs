//! RIS phase configurations and received-signal synthesis.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mobility::ChannelState;
use crate::wavefield::{ComplexSample, LinkGeometry};

/// Phases closer than this to 0 or 2 pi are snapped to 0.
const PHASE_SNAP: f64 = 1e-12;

/// Below this `|e^{j a} - 1|` the coherent gain takes its aligned value.
const ALIGNED_EPS: f64 = 1e-12;

/// Wrap a phase to `[0, 2 pi)`, snapping values within 1e-12 of either end to 0.
pub fn wrap_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    if p < PHASE_SNAP || TAU - p < PHASE_SNAP {
        0.0
    } else {
        p
    }
}

/// Wrap to the principal interval `(-pi, pi]`.
pub fn wrap_principal(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    if p > std::f64::consts::PI {
        p - TAU
    } else {
        p
    }
}

/// Smallest absolute angular distance between two phases.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_principal(a - b).abs()
}

/// The diagonal of the RIS reflection matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RisConfiguration {
    phases: Vec<f64>,
    pub config_id: u64,
}

impl RisConfiguration {
    pub fn new(phases: impl IntoIterator<Item = f64>, config_id: u64) -> Self {
        RisConfiguration {
            phases: phases.into_iter().map(wrap_phase).collect(),
            config_id,
        }
    }

    /// Linear phase law `phi_n = n * step` (zero-based `n`).
    pub fn linear(step: f64, n_ris: usize, config_id: u64) -> Self {
        RisConfiguration::new((0..n_ris).map(|n| n as f64 * step), config_id)
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn with_id(mut self, config_id: u64) -> Self {
        self.config_id = config_id;
        self
    }

    /// Round each phase to one of `2^bits` uniform levels.
    pub fn quantized(&self, bits: u32) -> RisConfiguration {
        let levels = (1u64 << bits.min(52)) as f64;
        let q = TAU / levels;
        RisConfiguration::new(
            self.phases.iter().map(|p| (p / q).round() * q),
            self.config_id,
        )
    }

    /// Largest per-element wrapped phase difference to `other`.
    pub fn max_phase_distance(&self, other: &RisConfiguration) -> f64 {
        self.phases
            .iter()
            .zip(&other.phases)
            .map(|(a, b)| phase_distance(*a, *b))
            .fold(0.0, f64::max)
    }
}

/// Configuration that co-phases all elements for the given angles:
/// `phi_n = (2 pi d / lambda) n (sin theta1 - sin theta2)`.
pub fn optimal_config(theta1: f64, theta2: f64, geom: &LinkGeometry) -> RisConfiguration {
    let step = geom.phase_slope() * (theta1.sin() - theta2.sin());
    RisConfiguration::linear(step, geom.n_ris, 0)
}

/// Differential update `phi_n <- phi_n - (2 pi d / lambda) n w`.
pub fn update_config(current: &RisConfiguration, w: f64, geom: &LinkGeometry) -> RisConfiguration {
    let slope = geom.phase_slope() * w;
    RisConfiguration::new(
        current
            .phases
            .iter()
            .enumerate()
            .map(|(n, p)| p - slope * n as f64),
        current.config_id + 1,
    )
}

/// Array gain under a steering mismatch `w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherentGain {
    pub value: Complex64,
    pub w: f64,
}

impl CoherentGain {
    pub fn magnitude(&self) -> f64 {
        self.value.norm()
    }

    pub fn phase(&self) -> f64 {
        self.value.arg()
    }
}

/// Closed-form geometric sum `sum_{n<N} e^{j (2 pi d / lambda) n w}`.
pub fn coherent_gain(w: f64, n_ris: usize, spacing_d: f64, wavelength: f64) -> CoherentGain {
    let a = TAU * spacing_d / wavelength * w;
    let n = n_ris as f64;
    // |e^{ja} - 1| = 2 |sin(a/2)|; writing both numerator and denominator in
    // half-angle form keeps full relative precision for small a.
    let half_sin = (a / 2.0).sin();
    let value = if 2.0 * half_sin.abs() < ALIGNED_EPS {
        // a is a multiple of 2 pi: every term is 1
        Complex64::new(n, 0.0)
    } else {
        Complex64::from_polar((n * a / 2.0).sin() / half_sin, a * (n - 1.0) / 2.0)
    };
    CoherentGain { value, w }
}

/// Noiseless array factor `sum_n e^{j (phi_n - (2 pi d / lambda) n (sin theta1 - sin theta2))}`.
pub fn array_factor(config: &RisConfiguration, theta2: f64, geom: &LinkGeometry) -> Complex64 {
    let step = geom.phase_slope() * (geom.theta1.sin() - theta2.sin());
    // Horner over z = e^{-j step}: sum_n e^{j phi_n} z^n
    let z = Complex64::from_polar(1.0, -step);
    config
        .phases
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &p| {
            acc * z + Complex64::from_polar(1.0, p)
        })
}

/// UE sample `c alpha beta AF + noise` for unit transmitted symbol.
pub fn received_sample(
    channel: &ChannelState,
    config: &RisConfiguration,
    geom: &LinkGeometry,
    noise: Complex64,
) -> Result<ComplexSample> {
    if config.len() != geom.n_ris {
        return Err(Error::DimensionMismatch {
            expected: geom.n_ris,
            got: config.len(),
        });
    }
    let af = array_factor(config, channel.theta2, geom);
    let clean = geom.beamformer_gain() * geom.alpha * channel.beta * af;
    Ok(ComplexSample(clean + noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::{ap_beamformer, ap_ris_channel, steering_vector};
    use std::f64::consts::PI;

    fn geom() -> LinkGeometry {
        LinkGeometry::default()
    }

    fn brute_gain(w: f64, n: usize, slope: f64) -> Complex64 {
        (0..n)
            .map(|k| Complex64::from_polar(1.0, slope * k as f64 * w))
            .sum()
    }

    #[test]
    fn aligned_angles_give_zero_phases() {
        let g = geom();
        let c = optimal_config(0.3, 0.3, &g);
        assert!(c.phases().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn optimal_config_example() {
        let g = geom();
        let c = optimal_config(45f64.to_radians(), 20f64.to_radians(), &g);
        let step = PI * (45f64.to_radians().sin() - 20f64.to_radians().sin());
        assert!((step - 1.1470).abs() < 1e-4);
        assert_eq!(c.phases()[0], 0.0);
        assert!((c.phases()[1] - step).abs() < 1e-12);
        for (n, p) in c.phases().iter().enumerate() {
            assert!(phase_distance(*p, n as f64 * step) < 1e-10);
            assert!((0.0..TAU).contains(p));
        }
    }

    #[test]
    fn update_identities() {
        let g = geom();
        let c = optimal_config(g.theta1, 0.2, &g).with_id(5);
        let same = update_config(&c, 0.0, &g);
        assert_eq!(same.phases(), c.phases());
        assert_eq!(same.config_id, 6);

        let next = update_config(&c, 0.31f64.sin() - 0.2f64.sin(), &g);
        let target = optimal_config(g.theta1, 0.31, &g);
        assert!(next.max_phase_distance(&target) < 1e-10);

        let two = update_config(&update_config(&c, 0.01, &g), -0.03, &g);
        let one = update_config(&c, -0.02, &g);
        assert!(two.max_phase_distance(&one) < 1e-10);
    }

    #[test]
    fn coherent_gain_cases() {
        let zero = coherent_gain(0.0, 64, 0.0025, 0.005);
        assert_eq!(zero.value, Complex64::new(64.0, 0.0));
        // (2 pi d / lambda) w = 2 pi / N
        let w = 2.0 / 64.0;
        let null = coherent_gain(w, 64, 0.0025, 0.005);
        assert!(null.magnitude() < 1e-12);
        // grating lobe: a = 2 pi
        let grating = coherent_gain(2.0, 64, 0.0025, 0.005);
        assert_eq!(grating.value, Complex64::new(64.0, 0.0));
    }

    #[test]
    fn coherent_gain_matches_direct_sum() {
        let slope = PI;
        for i in 0..2000 {
            let w = -2.0 + 4.0 * (i as f64 + 0.37) / 2000.0;
            for n in [1usize, 2, 64, 128] {
                let closed = coherent_gain(w, n, 0.0025, 0.005).value;
                let direct = brute_gain(w, n, slope);
                let scale = direct.norm().max(1.0);
                assert!((closed - direct).norm() / scale < 1e-10, "w={w} n={n}");
            }
        }
    }

    #[test]
    fn coherent_gain_symmetry() {
        for w in [0.001, 0.013, 0.2, 0.77] {
            let p = coherent_gain(w, 64, 0.0025, 0.005);
            let m = coherent_gain(-w, 64, 0.0025, 0.005);
            assert!((p.magnitude() - m.magnitude()).abs() < 1e-9);
            assert!((p.phase() + m.phase()).abs() < 1e-9);
            assert!(p.magnitude() <= 64.0 + 1e-9);
        }
    }

    #[test]
    fn received_sample_optimal_magnitude() {
        let g = geom();
        let ch = ChannelState {
            beta: Complex64::new(0.2, -0.7),
            theta2: 0.35,
            r2: 4.0,
            slot_index: 1,
        };
        let c = optimal_config(g.theta1, ch.theta2, &g);
        let y = received_sample(&ch, &c, &g, Complex64::new(0.0, 0.0)).unwrap();
        let expected = g.beamformer_gain() * ch.beta.norm() * 64.0;
        assert!((y.magnitude() / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stale_config_gives_coherent_gain() {
        let g = geom();
        let (ts, tn) = (0.35, 0.36);
        let ch = ChannelState {
            beta: Complex64::new(0.5, 0.1),
            theta2: tn,
            r2: 4.0,
            slot_index: 1,
        };
        let c = optimal_config(g.theta1, ts, &g);
        let y = received_sample(&ch, &c, &g, Complex64::new(0.0, 0.0)).unwrap();
        let n = coherent_gain(tn.sin() - ts.sin(), 64, g.spacing_d, g.wavelength).value;
        let expected = g.beamformer_gain() * g.alpha * ch.beta * n;
        assert!((y.value() - expected).norm() / expected.norm() < 1e-9);
    }

    #[test]
    fn closed_form_matches_matrix_pipeline() {
        let g = LinkGeometry {
            alpha: Complex64::new(0.6, 0.3),
            phi_ap: 0.4,
            ..geom()
        };
        let gm = ap_ris_channel(&g).unwrap();
        let f = ap_beamformer(&g).unwrap();
        for i in 0..20 {
            let theta2 = -1.2 + 0.12 * i as f64;
            let beta = Complex64::from_polar(0.3 + 0.05 * i as f64, 0.7 * i as f64);
            let ch = ChannelState {
                beta,
                theta2,
                r2: 3.0,
                slot_index: 1,
            };
            let c = RisConfiguration::new((0..64).map(|n| (n * n) as f64 * 0.01 + i as f64), 0);
            let a2 = steering_vector(theta2, 64, g.spacing_d, g.wavelength).unwrap();
            let mut gf = vec![Complex64::new(0.0, 0.0); 64];
            for (r, v) in gf.iter_mut().enumerate() {
                for (col, fv) in f.iter().enumerate() {
                    *v += gm[(r, col)] * fv;
                }
            }
            let y_matrix: Complex64 = (0..64)
                .map(|n| {
                    beta * a2.entries()[n].conj()
                        * Complex64::from_polar(1.0, c.phases()[n])
                        * gf[n]
                })
                .sum();
            let y = received_sample(&ch, &c, &g, Complex64::new(0.0, 0.0)).unwrap();
            assert!((y.value() - y_matrix).norm() / y_matrix.norm().max(1e-12) < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = geom();
        let ch = ChannelState {
            beta: Complex64::new(1.0, 0.0),
            theta2: 0.0,
            r2: 1.0,
            slot_index: 1,
        };
        let c = RisConfiguration::linear(0.1, 10, 0);
        assert!(matches!(
            received_sample(&ch, &c, &g, Complex64::new(0.0, 0.0)),
            Err(Error::DimensionMismatch {
                expected: 64,
                got: 10
            })
        ));
    }

    #[test]
    fn wrapping_and_quantizer() {
        assert_eq!(wrap_phase(TAU), 0.0);
        assert_eq!(wrap_phase(-1e-13), 0.0);
        assert!((wrap_phase(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!((wrap_principal(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_principal(PI) - PI).abs() < 1e-12);
        let c = RisConfiguration::new([0.1, 1.0, 3.0], 0);
        let q = c.quantized(2);
        for p in q.phases() {
            let level = p / (PI / 2.0);
            assert!((level - level.round()).abs() < 1e-12);
        }
    }
}
