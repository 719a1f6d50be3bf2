//! Link-level simulation of RIS-assisted mmWave downlink with a mobile user.
//!
//! The crate is organised bottom-up:
//!
//! - [`wavefield`]: steering vectors, path loss and the static AP-RIS channel.
//! - [`mobility`]: ground-truth user trajectory and per-slot RIS-UE channel.
//! - [`ris`]: phase configurations, the optimal configuration law, coherent
//!   gain and received-sample synthesis.
//! - [`tracking`]: feedback observables, the two-dimensional candidate search
//!   and candidate selection by downlink training.
//! - [`baselines`]: exhaustive phase sweep and the genie (oracle) configurator.
//! - [`simengine`]: the slot-accurate timeline, signalling accounting and
//!   rate metrics.
//! - [`cli`]: scenario files, run orchestration and CSV/summary output.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod mobility;
pub mod ris;
pub mod selftest;
pub mod simengine;
pub mod tracking;
pub mod wavefield;

pub use error::{Error, Result};
pub use num_complex::Complex64;
