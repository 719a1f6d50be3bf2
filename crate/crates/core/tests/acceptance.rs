//! One line per acceptance criterion; exits nonzero if any fails.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ristrack::baselines::SweepSpec;
use ristrack::cli::{load_config, ScenarioConfig};
use ristrack::mobility::{generate_trajectory, BetaInit, ChannelState, TrajectorySpec};
use ristrack::ris::{coherent_gain, optimal_config, received_sample, update_config};
use ristrack::simengine::{cumulative_mean, overhead_report, run_timeline, Tracker};
use ristrack::tracking::{measure_observables, two_dim_search, SearchGrid};
use ristrack::wavefield::{ap_beamformer, ap_ris_channel, steering_vector, LinkGeometry};
use ristrack::Complex64;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn c1_coherent_gain() -> Outcome {
    let start = Instant::now();
    let geom = LinkGeometry::default();
    let k = TAU * geom.spacing_d / geom.wavelength;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let w: f64 = rng.random_range(-2.0..2.0);
        for n in [1usize, 2, 64, 128] {
            let closed = coherent_gain(w, n, geom.spacing_d, geom.wavelength).value;
            let direct: Complex64 = (0..n)
                .map(|i| Complex64::from_polar(1.0, k * i as f64 * w))
                .sum();
            // relative to the sum's magnitude, floored at one term near nulls
            worst = worst.max((closed - direct).norm() / direct.norm().max(1.0));
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-10 && t < Duration::from_secs(1),
        format!("worst relative error {worst:.2e} (tol 1e-10), {}", secs(t)),
    )
}

fn c2_optimal_law() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_mag, mut worst_matrix) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let geom = LinkGeometry {
            theta1: rng.random_range(-1.3..1.3),
            phi_ap: rng.random_range(-1.3..1.3),
            alpha: Complex64::from_polar(rng.random_range(0.1..2.0), rng.random_range(0.0..TAU)),
            ..LinkGeometry::default()
        };
        let theta2 = rng.random_range(-1.3..1.3);
        let ch = ChannelState {
            beta: Complex64::from_polar(rng.random_range(0.05..3.0), rng.random_range(0.0..TAU)),
            theta2,
            r2: rng.random_range(1.0..6.0),
            slot_index: 1,
        };
        let cfg = optimal_config(geom.theta1, theta2, &geom);
        let y = received_sample(&ch, &cfg, &geom, zero()).unwrap().value();
        let expected =
            geom.beamformer_gain() * geom.alpha.norm() * ch.beta.norm() * geom.n_ris as f64;
        worst_mag = worst_mag.max((y.norm() / expected - 1.0).abs());

        let g = ap_ris_channel(&geom).unwrap();
        let f = DVector::from_vec(ap_beamformer(&geom).unwrap());
        let theta = DVector::from_iterator(
            geom.n_ris,
            cfg.phases().iter().map(|&p| Complex64::from_polar(1.0, p)),
        );
        let h = DVector::from_vec(
            steering_vector(theta2, geom.n_ris, geom.spacing_d, geom.wavelength)
                .unwrap()
                .into_inner(),
        );
        let gf = &g * &f;
        let reflected =
            DVector::from_iterator(geom.n_ris, theta.iter().zip(gf.iter()).map(|(a, b)| a * b));
        let y_matrix = (h.adjoint() * reflected)[(0, 0)] * ch.beta;
        worst_matrix = worst_matrix.max((y_matrix - y).norm() / expected);
    }
    let t = start.elapsed();
    outcome(
        worst_mag <= 1e-9 && worst_matrix <= 1e-9 && t < Duration::from_secs(1),
        format!(
            "magnitude {worst_mag:.2e}, matrix oracle {worst_matrix:.2e} (tol 1e-9), {}",
            secs(t)
        ),
    )
}

fn c3_update_rule() -> Outcome {
    let geom = LinkGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a: f64 = rng.random_range(-1.4..1.4);
        let b: f64 = rng.random_range(-1.4..1.4);
        let direct = optimal_config(geom.theta1, b, &geom);
        let updated = update_config(
            &optimal_config(geom.theta1, a, &geom),
            b.sin() - a.sin(),
            &geom,
        );
        worst = worst.max(direct.max_phase_distance(&updated));
    }
    outcome(
        worst <= 1e-10,
        format!("worst phase gap {worst:.2e} rad (tol 1e-10)"),
    )
}

fn c4_trajectory() -> Outcome {
    let geom = LinkGeometry::default();
    let base = TrajectorySpec::default();
    let spec = TrajectorySpec {
        path_length: 100_000.0 * base.speed_v * base.slot_duration_t0,
        beta_init: BetaInit::Fixed(Complex64::new(0.4, -0.9)),
        ..base
    };
    let traj = generate_trajectory(&spec, &geom).unwrap();
    // Cartesian oracle: surface at the origin, broadside along +x
    let (ax, ay) = (
        spec.r2_init * spec.theta2_init.cos(),
        spec.r2_init * spec.theta2_init.sin(),
    );
    let heading = spec.theta2_init + std::f64::consts::PI - spec.psi_a;
    let (mut worst_geom, mut worst_gain) = (0.0f64, 0.0f64);
    let c0 = traj[0].beta.norm() * (geom.r1 + traj[0].r2);
    for (i, s) in traj.iter().enumerate() {
        let d = spec.speed_v * i as f64 * spec.slot_duration_t0;
        let (x, y) = (ax + d * heading.cos(), ay + d * heading.sin());
        worst_geom = worst_geom
            .max((x.hypot(y) - s.r2).abs())
            .max((y.atan2(x) - s.theta2).abs());
        worst_gain = worst_gain.max((s.beta.norm() * (geom.r1 + s.r2) / c0 - 1.0).abs());
    }
    outcome(
        traj.len() >= 100_000 && worst_geom <= 1e-9 && worst_gain <= 1e-9,
        format!(
            "{} slots, geometry {worst_geom:.2e}, gain product {worst_gain:.2e} (tol 1e-9)",
            traj.len()
        ),
    )
}

fn c5_search_recovery() -> Outcome {
    let start = Instant::now();
    let geom = LinkGeometry::default();
    let grid = SearchGrid::for_wavelength(geom.wavelength);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut hits = 0;
    for _ in 0..100 {
        let th_ref: f64 = rng.random_range(0.0f64..50.0).to_radians();
        let th_now = th_ref + rng.random_range(-2.0f64..2.0).to_radians();
        let r_ref = geom.r1 + rng.random_range(1.0..6.0);
        let r_now = r_ref + rng.random_range(-0.004..0.004);
        let beta = Complex64::from_polar(rng.random_range(0.2..2.0), rng.random_range(0.0..TAU));
        let beta_now = beta
            * (r_ref / r_now)
            * Complex64::from_polar(1.0, TAU * (r_now - r_ref) / geom.wavelength);
        let cfg = optimal_config(geom.theta1, th_ref, &geom);
        let ch_ref = ChannelState {
            beta,
            theta2: th_ref,
            r2: r_ref - geom.r1,
            slot_index: 1,
        };
        let ch_now = ChannelState {
            beta: beta_now,
            theta2: th_now,
            r2: r_now - geom.r1,
            slot_index: 2,
        };
        let y_ref = received_sample(&ch_ref, &cfg, &geom, zero()).unwrap();
        let y_now = received_sample(&ch_now, &cfg, &geom, zero()).unwrap();
        let obs = measure_observables(y_ref, y_now, r_ref, th_ref).unwrap();
        let cands = two_dim_search(&obs, &grid, &geom).unwrap();
        if cands
            .iter()
            .take(7)
            .any(|c| (c.theta2_cand - th_now).abs() <= grid.theta2_step + 1e-12)
        {
            hits += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        hits >= 99 && t < Duration::from_secs(30),
        format!(
            "{hits}/100 transitions recovered in top-7 (need 99), {}",
            secs(t)
        ),
    )
}

fn mean_pct(config: &ScenarioConfig, tracker: &Tracker) -> f64 {
    let gamma = config.params.threshold_for(tracker);
    let total: f64 = config
        .seeds
        .iter()
        .map(|&seed| {
            let traj = config.trajectory_for(seed).unwrap();
            let rec = run_timeline(
                &traj,
                tracker,
                &config.params,
                &config.geometry,
                config.noise_for(seed),
            )
            .unwrap();
            overhead_report(&rec, gamma).pct_below_threshold
        })
        .sum();
    total / config.seeds.len() as f64
}

fn c6_overhead() -> Outcome {
    let start = Instant::now();
    let config = load_config(&scenario("overhead_2m.toml")).unwrap();
    let ok_setup = config.geometry.r1 == 2.0
        && config.trajectory.r2_init == 2.0
        && config.trajectory.speed_v == 0.6
        && config.params.gamma == 0.9
        && config.params.gamma_exh == 0.5
        && config.seeds.len() >= 10;
    let prop = mean_pct(&config, &Tracker::Proposed(SearchGrid::default()));
    let exh = mean_pct(&config, &Tracker::Exhaustive(SweepSpec::new(1.0).unwrap()));
    let ratio = exh / prop;
    let t = start.elapsed();
    outcome(
        ok_setup && prop < 1.0 && (2.0..=8.0).contains(&exh) && ratio >= 10.0 && t < Duration::from_secs(300),
        format!(
            "proposed {prop:.3}% (<1), exhaustive 1deg {exh:.3}% ([2, 8]), ratio {ratio:.1} (>=10), {} seeds, {}",
            config.seeds.len(),
            secs(t)
        ),
    )
}

fn mean_final_rate(config: &ScenarioConfig, tracker: &Tracker) -> f64 {
    let total: f64 = config
        .seeds
        .iter()
        .map(|&seed| {
            let traj = config.trajectory_for(seed).unwrap();
            let rec = run_timeline(
                &traj,
                tracker,
                &config.params,
                &config.geometry,
                config.noise_for(seed),
            )
            .unwrap();
            overhead_report(&rec, 0.0).final_cumulative_rate()
        })
        .sum();
    total / config.seeds.len() as f64
}

fn c7_orderings() -> Outcome {
    let start = Instant::now();
    let base = load_config(&scenario("parallel_walk.toml")).unwrap();
    let proposed = Tracker::Proposed(SearchGrid::default());
    let exh = |r: f64| Tracker::Exhaustive(SweepSpec::new(r).unwrap());
    let oracle = mean_final_rate(&base, &Tracker::Oracle);
    let prop = mean_final_rate(&base, &proposed);
    let (e1, e5, e10) = (
        mean_final_rate(&base, &exh(1.0)),
        mean_final_rate(&base, &exh(5.0)),
        mean_final_rate(&base, &exh(10.0)),
    );

    let with = |f: &dyn Fn(&mut ScenarioConfig)| {
        let mut c = base.clone();
        f(&mut c);
        mean_final_rate(&c, &proposed)
    };
    let v12 = with(&|c| c.trajectory.speed_v = 1.2);
    let v18 = with(&|c| c.trajectory.speed_v = 1.8);
    let g08 = with(&|c| c.params.gamma = 0.8);
    let g05 = with(&|c| c.params.gamma = 0.5);

    let checks = [
        oracle >= prop,
        prop >= e5,
        e5 >= e1.max(e10),
        prop >= v12 && v12 >= v18,
        prop >= g08 && g08 >= g05,
        base.seeds.len() >= 10,
    ];
    let t = start.elapsed();
    outcome(
        checks.iter().all(|c| *c),
        format!(
            "oracle {oracle:.4} >= proposed {prop:.4} >= exh5 {e5:.4} >= max(exh1 {e1:.4}, exh10 {e10:.4}); \
             v 0.6/1.2/1.8: {prop:.4}/{v12:.4}/{v18:.4}; gamma 0.9/0.8/0.5: {prop:.4}/{g08:.4}/{g05:.4}; {}",
            secs(t)
        ),
    )
}

fn c8_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("det.toml");
    let src = std::fs::read_to_string(scenario("parallel_walk.toml"))
        .unwrap()
        .replace("path_length = 1.0", "path_length = 0.1")
        .replace("seeds = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]", "seeds = [7, 8]");
    std::fs::write(&cfg, src).unwrap();
    let mut runs = Vec::new();
    for name in ["first", "second"] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_ristrack"))
            .arg("run")
            .arg(&cfg)
            .env("RISTRACK_OUTPUT_DIR", &out)
            .output()
            .unwrap();
        if !status.status.success() {
            return outcome(
                false,
                format!("run failed: {}", String::from_utf8_lossy(&status.stderr)),
            );
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        files.sort();
        runs.push(files);
    }
    let same = runs[0].len() == runs[1].len()
        && runs[0].iter().zip(&runs[1]).all(|(a, b)| {
            a.file_name() == b.file_name() && std::fs::read(a).unwrap() == std::fs::read(b).unwrap()
        });
    outcome(
        same && !runs[0].is_empty(),
        format!("{} CSV files compared byte for byte", runs[0].len()),
    )
}

fn c9_recurrence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let xs: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..25.0)).collect();
    let rec = cumulative_mean(&xs);
    let mut worst = 0.0f64;
    for t in 0..xs.len() {
        let direct = xs[..=t].iter().sum::<f64>() / (t + 1) as f64;
        worst = worst.max((direct - rec[t]).abs());
    }
    outcome(
        worst <= 1e-12,
        format!("worst gap {worst:.2e} over {} slots (tol 1e-12)", xs.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("coherent gain closed form", c1_coherent_gain),
        ("optimal configuration law", c2_optimal_law),
        ("update rule consistency", c3_update_rule),
        ("trajectory oracle", c4_trajectory),
        ("noiseless search recovery", c5_search_recovery),
        ("signalling overhead", c6_overhead),
        ("rate orderings", c7_orderings),
        ("determinism", c8_determinism),
        ("cumulative rate recurrence", c9_recurrence),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        println!(
            "criterion {}: {} {name}: {}",
            i + 1,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
