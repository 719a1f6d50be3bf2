//! Array response and free-space primitives.
//!
//! Angles are radians and element indices are zero-based throughout; the
//! configuration layer converts from degrees at the boundary.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default carrier wavelength: 60 GHz.
pub const DEFAULT_WAVELENGTH: f64 = 0.005;

/// One complex baseband value as seen by the UE.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexSample(pub Complex64);

impl ComplexSample {
    pub const ZERO: ComplexSample = ComplexSample(Complex64::new(0.0, 0.0));

    pub fn value(self) -> Complex64 {
        self.0
    }

    /// Received signal strength `|y|^2`.
    pub fn rss(self) -> f64 {
        self.0.norm_sqr()
    }

    pub fn magnitude(self) -> f64 {
        self.0.norm()
    }

    /// Principal-value phase in `(-pi, pi]`.
    pub fn phase(self) -> f64 {
        self.0.arg()
    }
}

impl From<Complex64> for ComplexSample {
    fn from(value: Complex64) -> Self {
        ComplexSample(value)
    }
}

/// Static scene: AP array, RIS array, and the fixed AP-RIS link.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkGeometry {
    pub n_tx: usize,
    pub n_ris: usize,
    /// Element spacing shared by the AP and RIS arrays, meters.
    pub spacing_d: f64,
    pub wavelength: f64,
    /// RIS-side angle of arrival of the AP-RIS path.
    pub theta1: f64,
    /// AP-side angle of departure.
    pub phi_ap: f64,
    /// AP-RIS distance, meters.
    pub r1: f64,
    pub alpha: Complex64,
    pub snr_linear: f64,
    pub noise_var: f64,
}

impl Default for LinkGeometry {
    fn default() -> Self {
        LinkGeometry {
            n_tx: 16,
            n_ris: 64,
            spacing_d: DEFAULT_WAVELENGTH / 2.0,
            wavelength: DEFAULT_WAVELENGTH,
            theta1: 45f64.to_radians(),
            phi_ap: 0.0,
            r1: 4.0,
            alpha: Complex64::new(1.0, 0.0),
            snr_linear: 10.0,
            noise_var: 1.0,
        }
    }
}

impl LinkGeometry {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidGeometry(msg.to_string()));
        if self.n_tx == 0 {
            return bad("n_tx must be at least 1");
        }
        if self.n_ris == 0 {
            return bad("n_ris must be at least 1");
        }
        if !(self.spacing_d > 0.0) {
            return bad("spacing_d must be positive");
        }
        if !(self.wavelength > 0.0) {
            return bad("wavelength must be positive");
        }
        if !(self.r1 > 0.0) {
            return bad("r1 must be positive");
        }
        if !(self.theta1.abs() < PI / 2.0) {
            return bad("theta1 must lie in (-90, 90) degrees");
        }
        if !(self.phi_ap.abs() < PI / 2.0) {
            return bad("phi_ap must lie in (-90, 90) degrees");
        }
        if !(self.snr_linear >= 0.0) {
            return bad("snr must be non-negative");
        }
        if !(self.noise_var > 0.0) {
            return bad("noise_var must be positive");
        }
        Ok(())
    }

    /// Per-element phase slope `2 pi d / lambda`.
    pub fn phase_slope(&self) -> f64 {
        TAU * self.spacing_d / self.wavelength
    }

    /// Beamforming constant `c = sqrt(SNR) * |a_AP|`; the AP steering vector
    /// has unit-modulus entries so `|a_AP| = sqrt(N_t)`.
    pub fn beamformer_gain(&self) -> f64 {
        self.snr_linear.sqrt() * (self.n_tx as f64).sqrt()
    }

    /// Noiseless RSS of a perfectly aligned surface, `|c alpha beta N|^2`.
    pub fn aligned_rss(&self, beta: Complex64) -> f64 {
        (self.beamformer_gain() * self.alpha * beta * self.n_ris as f64).norm_sqr()
    }
}

/// Unit-modulus response of a uniform linear array.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringVector(Vec<Complex64>);

impl SteeringVector {
    pub fn entries(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self^H other`.
    pub fn inner(&self, other: &SteeringVector) -> Complex64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }
}

/// `a(angle)[k] = exp(-j (2 pi d / lambda) k sin(angle))`.
pub fn steering_vector(
    angle: f64,
    count: usize,
    spacing_d: f64,
    wavelength: f64,
) -> Result<SteeringVector> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "steering vector needs at least one element".into(),
        ));
    }
    if !(spacing_d > 0.0) || !(wavelength > 0.0) {
        return Err(Error::InvalidArgument(
            "spacing and wavelength must be positive".into(),
        ));
    }
    let step = -TAU * spacing_d / wavelength * angle.sin();
    let entries = (0..count)
        .map(|k| {
            if k == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, step * k as f64)
            }
        })
        .collect();
    Ok(SteeringVector(entries))
}

/// Free-space path loss in linear scale, `(4 pi r / lambda)^2`.
pub fn path_loss_linear(distance: f64, wavelength: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distance must be positive, got {distance}"
        )));
    }
    if !(wavelength > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "wavelength must be positive, got {wavelength}"
        )));
    }
    Ok((4.0 * PI * distance / wavelength).powi(2))
}

/// AP-RIS channel `G = alpha a_RA(theta1) a_AP(phi_AP)^H`, shape `n_ris x n_tx`.
pub fn ap_ris_channel(geom: &LinkGeometry) -> Result<DMatrix<Complex64>> {
    geom.validate()?;
    let a_ra = steering_vector(geom.theta1, geom.n_ris, geom.spacing_d, geom.wavelength)?;
    let a_ap = steering_vector(geom.phi_ap, geom.n_tx, geom.spacing_d, geom.wavelength)?;
    Ok(DMatrix::from_fn(geom.n_ris, geom.n_tx, |i, j| {
        geom.alpha * a_ra.0[i] * a_ap.0[j].conj()
    }))
}

/// AP beamformer `f = sqrt(SNR) a_AP / |a_AP|`.
pub fn ap_beamformer(geom: &LinkGeometry) -> Result<Vec<Complex64>> {
    let a_ap = steering_vector(geom.phi_ap, geom.n_tx, geom.spacing_d, geom.wavelength)?;
    let scale = geom.snr_linear.sqrt() / (geom.n_tx as f64).sqrt();
    Ok(a_ap.0.into_iter().map(|a| a * scale).collect())
}
