//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured values (visible with `--nocapture`).

use std::process::Command;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use recoil_lase::cavity::single_atom_light_shift;
use recoil_lase::config::{PumpLine, SweepDirection, SweepSpec, SystemParams};
use recoil_lase::dynamics;
use recoil_lase::equilibrium::{pulling_coefficient, Branch, HysteresisTrace, Model};
use recoil_lase::gain::rir_peak;
use recoil_lase::photon_stats::{
    apply_dead_time, bin_counts, g2_estimate, g2_zero_limit, gen_modulated, gen_poisson,
    BinnedCounts,
};
use recoil_lase::spectra::{doppler_difference, estimate_psd, fit_lorentzian_fwhm, synth_field};

fn pass(criterion: u32, detail: &str) {
    println!("criterion {criterion:02} PASS: {detail}");
}

#[test]
fn criterion_01_single_atom_light_shift() {
    let u0 = single_atom_light_shift(3.5e3, 1e6, 7.5e3).unwrap();
    assert!((u0 - 12.2).abs() < 0.1, "U0 = {u0} Hz, expected 12.2 Hz");
    assert!((u0 - 12.0).abs() <= 2.0, "U0 = {u0} Hz outside 12(2) Hz");
    pass(1, &format!("U0 = {u0:.3} Hz, within 12(2) Hz"));
}

#[test]
fn criterion_02_no_lasing_steady_state() {
    let params = SystemParams::default_params();
    let n = params.no_lasing_atom_number();
    // exact arithmetic: 2e7/19; the quoted 1.053e6 and the 1.1e6 in the
    // reference are roundings of this value
    assert_eq!(n, 2e7 / 19.0);
    assert!((n - 1.053e6).abs() < 5e2, "N = {n}");
    assert!((n - 1.1e6).abs() < 5e4, "N = {n} not consistent with 1.1e6");
    pass(
        2,
        &format!("R/gamma_loss = {n:.1} atoms (= 1.053e6 rounded)"),
    );
}

#[test]
fn criterion_03_rir_peak_position() {
    let (peak_hz, peak_gain) = rir_peak(1e-5, 689e-9, 1.0).unwrap();
    assert!(
        (42.5e3..=57.5e3).contains(&peak_hz),
        "peak at {peak_hz} Hz outside [42.5, 57.5] kHz"
    );
    assert!(peak_gain > 0.0);
    pass(3, &format!("gain peak at {peak_hz:.0} Hz for T = 10 uK"));
}

struct SweepOutputs {
    branches: Vec<Branch>,
    trace_up: HysteresisTrace,
    trace_down: HysteresisTrace,
}

fn default_sweep() -> &'static SweepOutputs {
    static CELL: OnceLock<SweepOutputs> = OnceLock::new();
    CELL.get_or_init(|| {
        let params = Box::leak(Box::new(SystemParams::default_params()));
        let model = Model::new(params);
        let up = SweepSpec::new(-6e6, 2e6, 1e3, SweepDirection::Up).unwrap();
        let down = SweepSpec::new(-6e6, 2e6, 1e3, SweepDirection::Down).unwrap();
        SweepOutputs {
            branches: model.sweep_branches(&up).unwrap(),
            trace_up: model.classify_zones_default(&model.hysteresis_sweep(&up).unwrap()),
            trace_down: model.classify_zones_default(&model.hysteresis_sweep(&down).unwrap()),
        }
    })
}

#[test]
fn criterion_04_zone_structure_and_hysteresis() {
    let started = std::time::Instant::now();
    let sweep = default_sweep();

    let zones_up = sweep
        .trace_up
        .points
        .iter()
        .map(|p| p.zone_id)
        .max()
        .unwrap();
    let zones_down = sweep
        .trace_down
        .points
        .iter()
        .map(|p| p.zone_id)
        .max()
        .unwrap();
    assert!(zones_down >= 3, "down-sweep zones = {zones_down}");
    assert!(zones_up >= 3, "up-sweep zones = {zones_up}");

    assert!(
        !sweep.trace_up.jump_locations.is_empty() && !sweep.trace_down.jump_locations.is_empty(),
        "expected jumps in both directions"
    );
    assert_ne!(
        sweep.trace_up.jump_locations, sweep.trace_down.jump_locations,
        "jump locations identical: no hysteresis"
    );

    // a pinned branch: stable, spanning >= 1 MHz, with |p_c| < 0.1 somewhere
    let mut pinned = None;
    let mut free_pulling: f64 = 0.0;
    for branch in sweep.branches.iter().filter(|b| b.points.len() >= 3) {
        let span = (branch.points.last().unwrap().delta_ca
            - branch.points.first().unwrap().delta_ca)
            .abs();
        let pulls = pulling_coefficient(branch).unwrap();
        let min_abs = pulls
            .iter()
            .map(|p| p.1.abs())
            .fold(f64::INFINITY, f64::min);
        let max_abs = pulls.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        if branch.stable && span >= 1e6 && min_abs < 0.1 {
            pinned.get_or_insert((branch.id, span, min_abs));
        } else if branch.stable {
            free_pulling = free_pulling.max(max_abs);
        }
    }
    let (pinned_id, span, min_abs) = pinned.expect("no pinned branch found");
    assert!(
        free_pulling >= 0.5,
        "no other branch with O(1) pulling (max {free_pulling})"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "sweep took {elapsed:?}");
    pass(
        4,
        &format!(
            "zones up/down = {zones_up}/{zones_down}, jumps up {:?} vs down {:?}, \
             branch {pinned_id} pinned over {:.2} MHz with min |p_c| = {min_abs:.3}, \
             free-branch |p_c| up to {free_pulling:.2}, elapsed {elapsed:?}",
            sweep.trace_up.jump_locations,
            sweep.trace_down.jump_locations,
            span / 1e6
        ),
    );
}

#[test]
fn criterion_05_pinning_mechanism() {
    let params = SystemParams::default_params();
    let n_ref = params.no_lasing_atom_number();
    let sweep = default_sweep();

    let mut found = None;
    for branch in sweep.branches.iter().filter(|b| b.stable) {
        // points whose dressed detuning sits within one gain width of the
        // pump line that feeds them most strongly
        let in_lock: Vec<_> = branch
            .points
            .iter()
            .filter(|p| {
                params.pump_lines.iter().any(|line| {
                    (p.delta_dressed - (line.detuning + params.gain_shift)).abs()
                        <= params.gain_fwhm
                })
            })
            .collect();
        if in_lock.len() < 3 {
            continue;
        }
        let n_min = in_lock
            .iter()
            .map(|p| p.n_star)
            .fold(f64::INFINITY, f64::min);
        let n_max = in_lock
            .iter()
            .map(|p| p.n_star)
            .fold(f64::NEG_INFINITY, f64::max);
        let depletion = branch
            .points
            .iter()
            .map(|p| p.n_star / n_ref)
            .fold(f64::INFINITY, f64::min);
        if n_max / n_min >= 2.0 && depletion < 0.5 {
            found = Some((branch.id, n_max / n_min, depletion));
            break;
        }
    }
    let (id, ratio, depletion) = found.expect(
        "no stable branch holds the dressed detuning within the gain width \
         while the atom number varies 2x",
    );
    pass(
        5,
        &format!(
            "branch {id}: N varies {ratio:.2}x inside the gain width, \
             min depletion {depletion:.3}"
        ),
    );
}

#[test]
fn criterion_06_oracle_equivalence() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(20_240_613);
    let mut total_roots = 0usize;
    for draw in 0..100 {
        let mut params = SystemParams::default_params();
        params.loading_rate = 10f64.powf(rng.random_range(6.7..7.7));
        params.loss_rate = rng.random_range(10.0..40.0);
        params.lasing_loss_rate = 10f64.powf(rng.random_range(-5.7..-4.5));
        params.photons_per_atom = 10f64.powf(rng.random_range(2.5..3.5));
        params.coupling = rng.random_range(2e3..6e3);
        params.gain_fwhm = rng.random_range(2e4..1e5);
        params.gain_shift = rng.random_range(0.0..2e5);
        params.pump_lines = vec![
            PumpLine::new(
                "a",
                -2.1e6 + rng.random_range(-1e6..1e6),
                rng.random_range(0.5..1.5),
            )
            .unwrap(),
            PumpLine::new(
                "b",
                -2.8e6 + rng.random_range(-1e6..1e6),
                rng.random_range(0.5..1.5),
            )
            .unwrap(),
        ];
        let delta_ca = rng.random_range(-6e6..2e6);
        let model = Model::new(&params);

        // brute-force oracle: one million uniform grid points, own bisection
        let n_max = 2.0 * params.no_lasing_atom_number();
        let grid_points = 1_000_000usize;
        let step = (n_max - 1.0) / (grid_points - 1) as f64;
        let mut oracle = Vec::new();
        let mut prev_n = 1.0_f64;
        let mut prev_f = model.atom_rate(prev_n, delta_ca);
        for i in 1..grid_points {
            let n = 1.0 + i as f64 * step;
            let f = model.atom_rate(n, delta_ca);
            if prev_f == 0.0 {
                oracle.push(prev_n);
            } else if prev_f.signum() != f.signum() && f != 0.0 {
                let (mut lo, mut hi) = (prev_n, n);
                let lo_sign = prev_f.signum();
                while hi - lo > 1e-12 * hi {
                    let mid = 0.5 * (lo + hi);
                    let fm = model.atom_rate(mid, delta_ca);
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                    } else if fm.signum() == lo_sign {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                oracle.push(0.5 * (lo + hi));
            }
            prev_n = n;
            prev_f = f;
        }

        let found = model.find_equilibria(delta_ca).unwrap();
        assert_eq!(
            found.len(),
            oracle.len(),
            "draw {draw}: count mismatch at delta_ca = {delta_ca}"
        );
        for (f, e) in found.iter().zip(&oracle) {
            assert!(
                (f.n_star - e).abs() <= 1e-3 * e,
                "draw {draw}: root {} vs oracle {e}",
                f.n_star
            );
        }

        // stability labels against transient outcomes
        for root in &found {
            for sign in [-1.0, 1.0] {
                let n0 = root.n_star * (1.0 + 0.01 * sign);
                let landed = dynamics::relax(
                    |n| model.atom_rate(n, delta_ca),
                    n0,
                    |n, rate| rate.abs() / n.max(1.0) < 1e-9 * params.loss_rate,
                    1e4 / params.loss_rate,
                )
                .unwrap();
                let returned = (landed - root.n_star).abs() <= 1e-4 * root.n_star;
                assert_eq!(
                    returned, root.stable,
                    "draw {draw}: root {} stable={} but transient landed at {landed}",
                    root.n_star, root.stable
                );
            }
        }
        total_roots += found.len();
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120, "oracle check took {elapsed:?}");
    pass(
        6,
        &format!(
            "100 draws, {total_roots} roots: counts exact, positions within 1e-3, \
             stability matches transients, elapsed {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_07_g2_estimator() {
    // coherent stream: tau -> 0 limit of the estimator is 1
    let stream = gen_poisson(1.5e6, 10.0, 42).unwrap();
    let bins = bin_counts(&stream, 300e-9).unwrap();
    let g2 = g2_estimate(&bins, 10).unwrap();
    let zero = g2_zero_limit(&g2).unwrap();
    assert!((zero - 1.0).abs() <= 0.05, "coherent g2(0) = {zero}");

    // dead time plus short bins biases the zero-delay value below one
    let short = gen_poisson(1.5e6, 2.0, 43).unwrap();
    let filtered = apply_dead_time(&short, 22e-9).unwrap();
    let biased_bins = bin_counts(&filtered, 30e-9).unwrap();
    let biased = g2_estimate(&biased_bins, 5).unwrap();
    let biased_zero = g2_zero_limit(&biased).unwrap();
    assert!(biased_zero < 1.0, "dead-time-biased g2(0) = {biased_zero}");

    // hand-computed toy, exact
    let toy = BinnedCounts {
        bin_width: 1.0,
        counts: vec![1, 2, 1, 0],
        i_max: 4,
    };
    let toy_g2 = g2_estimate(&toy, 1).unwrap();
    assert_eq!(toy_g2.g2[0], 1.5);
    assert_eq!(toy_g2.g2[1], 0.75);

    pass(
        7,
        &format!(
            "coherent g2(0) = {zero:.4}, dead-time-biased g2(0) = {biased_zero:.3} < 1, \
             toy = (1.5, 0.75) exact"
        ),
    );
}

#[test]
fn criterion_08_modulated_g2() {
    let rate = 1e6;
    let mod_freq = 1e4;
    let depth = 0.5;
    let bin = 1e-6;
    let n_seeds = 16u64;
    let duration = 0.5;
    let tau_max = 250usize;

    let mut sums = vec![0.0; tau_max + 1];
    let mut squares = vec![0.0; tau_max + 1];
    for seed in 0..n_seeds {
        let stream = gen_modulated(rate, mod_freq, depth, duration, 500 + seed).unwrap();
        let bins = bin_counts(&stream, bin).unwrap();
        let g2 = g2_estimate(&bins, tau_max).unwrap();
        for (i, &v) in g2.g2.iter().enumerate() {
            sums[i] += v;
            squares[i] += v * v;
        }
    }
    let k = n_seeds as f64;
    let lags: Vec<usize> = (5..=tau_max).step_by(5).collect();
    let sems: Vec<f64> = lags
        .iter()
        .map(|&lag| {
            let mean = sums[lag] / k;
            let var = (squares[lag] / k - mean * mean).max(0.0);
            (var / (k - 1.0)).sqrt()
        })
        .collect();
    // per-lag sample variances fluctuate strongly at this seed count while
    // the true variance is nearly lag-independent; the median pools them
    let mut sorted = sems.clone();
    sorted.sort_by(f64::total_cmp);
    let sem_floor = sorted[sorted.len() / 2];
    let mut worst_z = 0.0_f64;
    for (&lag, &sem) in lags.iter().zip(&sems) {
        let mean = sums[lag] / k;
        let tau = lag as f64 * bin;
        let analytic = 1.0 + 0.125 * (std::f64::consts::TAU * mod_freq * tau).cos();
        let z = (mean - analytic).abs() / sem.max(sem_floor);
        worst_z = worst_z.max(z);
        assert!(
            z <= 3.0,
            "lag {lag}: mean {mean} vs analytic {analytic}, z = {z:.2}"
        );
    }

    // oscillation period 100 us
    let mean_g2: Vec<f64> = sums.iter().map(|s| s / k).collect();
    let (peak_lag, _) = mean_g2
        .iter()
        .enumerate()
        .skip(50)
        .take(101)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let period = peak_lag as f64 * bin;
    assert!(
        (period - 1e-4).abs() <= 3e-6,
        "oscillation period {period} s"
    );
    pass(
        8,
        &format!(
            "g2 matches 1 + 0.125 cos(2 pi f tau), worst |z| = {worst_z:.2}, \
             period = {period:.2e} s"
        ),
    );
}

#[test]
fn criterion_09_linewidth_recovery() {
    let target = 7e3;
    let mut recovered = Vec::new();
    for seed in 0..20u64 {
        let trace = synth_field(target, 1e5, 1.0, 1e6, 900 + seed).unwrap();
        let spectrum = estimate_psd(&trace, 65536, 0.5).unwrap();
        let fit = fit_lorentzian_fwhm(&spectrum).unwrap();
        assert!(
            (fit.fwhm - target).abs() <= 0.15 * target,
            "seed {seed}: {} Hz off by more than 15%",
            fit.fwhm
        );
        recovered.push(fit.fwhm);
    }
    recovered.sort_by(f64::total_cmp);
    let median = recovered[recovered.len() / 2];
    assert!(
        (median - target).abs() <= 0.10 * target,
        "median {median} Hz off by more than 10%"
    );

    // zero-linewidth tone comes back resolution-limited
    let tone = synth_field(0.0, 1e5, 0.25, 1e6, 1234).unwrap();
    let spectrum = estimate_psd(&tone, 65536, 0.5).unwrap();
    let fit = fit_lorentzian_fwhm(&spectrum).unwrap();
    assert!(
        fit.resolution_limited,
        "tone not flagged (fwhm {} Hz, rbw {} Hz)",
        fit.fwhm, spectrum.resolution_bandwidth
    );
    pass(
        9,
        &format!(
            "7 kHz line: all 20 seeds within 15%, median {median:.0} Hz; \
             tone flagged resolution-limited"
        ),
    );
}

#[test]
fn criterion_10_doppler_relation() {
    let d = doppler_difference(0.01);
    let closed_form = 2.0 * 0.01 / 689e-9;
    assert!(
        (d.delta_f - closed_form).abs() <= 1e-3 * closed_form,
        "delta_f = {}",
        d.delta_f
    );
    assert!((d.delta_f - 29.0e3).abs() <= 0.1e3);
    // antisymmetry and linearity
    assert_eq!(doppler_difference(-0.01).delta_f, -d.delta_f);
    let half = doppler_difference(0.005).delta_f;
    assert!((2.0 * half - d.delta_f).abs() <= 1e-9 * d.delta_f);
    pass(
        10,
        &format!(
            "doppler_difference(0.01 m/s) = {:.1} Hz = 2v/lambda",
            d.delta_f
        ),
    );
}

#[test]
fn criterion_11_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_recoil-lase");
    let base = tempfile::tempdir().unwrap();

    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("gain-curve", vec!["gain-curve"]),
        (
            "sweep",
            vec![
                "sweep", "--start", "-2.2e6", "--stop", "-1.8e6", "--step", "1e4",
            ],
        ),
        (
            "g2",
            vec![
                "g2",
                "--gen",
                "modulated",
                "--rate",
                "2e5",
                "--duration",
                "0.5",
            ],
        ),
        (
            "spectrum",
            vec!["spectrum", "--duration", "0.1", "--segment", "8192"],
        ),
        (
            "dynamics",
            vec![
                "dynamics",
                "--delta-ca-before",
                "-1e6",
                "--delta-ca-after",
                "-1.2e6",
                "--t-end",
                "0.2",
            ],
        ),
        ("doppler", vec!["doppler", "--delta-t", "1.23e4"]),
    ];

    let mut compared = 0usize;
    for (name, args) in &runs {
        let mut outputs = Vec::new();
        for round in 0..2 {
            let out_dir = base.path().join(format!("{name}_{round}"));
            let status = Command::new(bin)
                .arg("--seed")
                .arg("7")
                .arg("--out-dir")
                .arg(&out_dir)
                .args(args)
                .status()
                .expect("binary runs");
            assert!(status.success(), "{name} round {round} failed");
            let mut files: Vec<_> = std::fs::read_dir(&out_dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "json"))
                .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
                .collect();
            files.sort();
            outputs.push(
                files
                    .iter()
                    .map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(p).unwrap()))
                    .collect::<Vec<_>>(),
            );
        }
        assert!(!outputs[0].is_empty(), "{name} produced no artifacts");
        assert_eq!(
            outputs[0].len(),
            outputs[1].len(),
            "{name}: artifact sets differ"
        );
        for (a, b) in outputs[0].iter().zip(&outputs[1]) {
            assert_eq!(a.0, b.0, "{name}: file names differ");
            assert_eq!(
                a.1,
                b.1,
                "{name}: {} differs between identical runs",
                a.0.to_string_lossy()
            );
            compared += 1;
        }
    }
    pass(
        11,
        &format!("{compared} artifacts byte-identical across repeated seeded runs"),
    );
}
