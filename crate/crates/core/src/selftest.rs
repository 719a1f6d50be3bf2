//! Fast invariant checks runnable from the command line.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mobility::{generate_trajectory, BetaInit, TrajectorySpec};
use crate::ris::{coherent_gain, optimal_config, phase_distance, received_sample, update_config};
use crate::simengine::cumulative_mean;
use crate::tracking::{measure_observables, two_dim_search, SearchGrid};
use crate::wavefield::{ap_beamformer, ap_ris_channel, LinkGeometry};

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> CheckResult {
    CheckResult {
        name,
        passed: worst <= tol,
        detail: format!("worst {worst:.3e}, tolerance {tol:.0e}"),
    }
}

fn direct_gain(w: f64, n: usize, geom: &LinkGeometry) -> Complex64 {
    let k = geom.phase_slope();
    (0..n)
        .map(|i| Complex64::from_polar(1.0, k * i as f64 * w))
        .sum()
}

pub fn run_all() -> Vec<CheckResult> {
    let geom = LinkGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let w = rng.random_range(-2.0..2.0);
        for n in [1, 2, 64, 128] {
            let a = coherent_gain(w, n, geom.spacing_d, geom.wavelength).value;
            let b = direct_gain(w, n, &geom);
            worst = worst.max((a - b).norm() / b.norm().max(1.0));
        }
    }
    out.push(check("coherent gain vs direct sum", worst, 1e-10));

    let g = ap_ris_channel(&geom).expect("default geometry");
    let f = ap_beamformer(&geom).expect("default geometry");
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let theta2: f64 = rng.random_range(-1.2..1.2);
        let ch = crate::mobility::ChannelState {
            beta: Complex64::from_polar(rng.random_range(0.1..2.0), rng.random_range(0.0..6.0)),
            theta2,
            r2: 4.0,
            slot_index: 1,
        };
        let cfg = optimal_config(geom.theta1, theta2, &geom);
        let y = received_sample(&ch, &cfg, &geom, Complex64::new(0.0, 0.0)).expect("sizes agree");
        let h =
            crate::wavefield::steering_vector(theta2, geom.n_ris, geom.spacing_d, geom.wavelength)
                .expect("valid angle");
        let gf = &g * nalgebra::DVector::from_vec(f.clone());
        let explicit: Complex64 = (0..geom.n_ris)
            .map(|n| {
                h.entries()[n].conj()
                    * ch.beta
                    * Complex64::from_polar(1.0, cfg.phases()[n])
                    * gf[n]
            })
            .sum();
        let expected =
            geom.beamformer_gain() * geom.alpha.norm() * ch.beta.norm() * geom.n_ris as f64;
        worst = worst
            .max((y.magnitude() / expected - 1.0).abs())
            .max((explicit.norm() / expected - 1.0).abs());
    }
    out.push(check("optimal configuration magnitude", worst, 1e-9));

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a: f64 = rng.random_range(-1.2..1.2);
        let b: f64 = rng.random_range(-1.2..1.2);
        let lhs = optimal_config(geom.theta1, b, &geom);
        let rhs = update_config(
            &optimal_config(geom.theta1, a, &geom),
            b.sin() - a.sin(),
            &geom,
        );
        worst = worst.max(lhs.max_phase_distance(&rhs));
    }
    out.push(check("update rule consistency", worst, 1e-10));

    let spec = TrajectorySpec {
        path_length: 0.2,
        beta_init: BetaInit::Fixed(Complex64::new(0.8, 0.1)),
        ..TrajectorySpec::default()
    };
    let traj = generate_trajectory(&spec, &geom).expect("valid trajectory");
    let c0 = traj[0].beta.norm() * (geom.r1 + traj[0].r2);
    let worst = traj
        .iter()
        .map(|s| (s.beta.norm() * (geom.r1 + s.r2) / c0 - 1.0).abs())
        .fold(0.0, f64::max);
    out.push(check("gain path-loss invariant", worst, 1e-9));

    let grid = SearchGrid::for_wavelength(geom.wavelength);
    let mut misses = 0usize;
    for _ in 0..20 {
        let th_ref: f64 = rng.random_range(0.2..0.8);
        let dth = rng.random_range(-2.0f64..2.0).to_radians();
        let dr = rng.random_range(-0.004..0.004);
        let r_ref = 8.0;
        let beta = Complex64::from_polar(1.0, rng.random_range(0.0..6.0));
        let cfg = optimal_config(geom.theta1, th_ref, &geom);
        let ch_ref = crate::mobility::ChannelState {
            beta,
            theta2: th_ref,
            r2: r_ref - geom.r1,
            slot_index: 1,
        };
        let r_now = r_ref + dr;
        let beta_now = beta
            * (r_ref / r_now)
            * Complex64::from_polar(1.0, std::f64::consts::TAU * dr / geom.wavelength);
        let ch_now = crate::mobility::ChannelState {
            beta: beta_now,
            theta2: th_ref + dth,
            r2: r_now - geom.r1,
            slot_index: 2,
        };
        let zero = Complex64::new(0.0, 0.0);
        let y_ref = received_sample(&ch_ref, &cfg, &geom, zero).expect("sizes agree");
        let y_now = received_sample(&ch_now, &cfg, &geom, zero).expect("sizes agree");
        let obs = measure_observables(y_ref, y_now, r_ref, th_ref).expect("nonzero reference");
        let cands = two_dim_search(&obs, &grid, &geom).expect("non-empty grid");
        let w_true = (th_ref + dth).sin() - th_ref.sin();
        let hit = cands.iter().any(|c| {
            phase_distance(c.theta2_cand, th_ref + dth) <= grid.theta2_step + 1e-12
                || (c.w_cand - w_true).abs() <= grid.theta2_step * th_ref.cos() * 1.01
        });
        if !hit {
            misses += 1;
        }
    }
    out.push(CheckResult {
        name: "noiseless search recovery",
        passed: misses == 0,
        detail: format!("{misses} of 20 transitions missed"),
    });

    let xs: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..20.0)).collect();
    let rec = cumulative_mean(&xs);
    let mut sum = 0.0;
    let mut worst = 0.0f64;
    for (i, (x, r)) in xs.iter().zip(&rec).enumerate() {
        sum += x;
        worst = worst.max((sum / (i + 1) as f64 - r).abs());
    }
    out.push(check("cumulative rate recurrence", worst, 1e-12));

    out
}
