//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
//!
//! `cargo test -p frictionloop --test acceptance -- --nocapture`

mod common;

use common::*;
use frictionloop::analysis::{amplitude_spectrum, evaluate_tracking, TrackingOptions};
use frictionloop::controller::{
    design_discrete, synthesize_ideal, ControlLoop, DesignTarget, LoopMode, SampledLoop,
    DEFAULT_WINDOW, U_NEUTRAL,
};
use frictionloop::experiment::{
    build_controller, characterize_impulses, run_loop, run_sweep_grid, simulate_gain_trials,
    simulate_impulses, ControllerSpec, ExperimentConfig, RunMode,
};
use frictionloop::lti::{log_grid, make_second_order, zoh_discretize, RationalTF, Signal, Unit};
use frictionloop::plant::{init_plant, ContactState, Kinematics, PlantConfig};
use frictionloop::signals::{sweep_grid, ReferenceSpec, TEXTURES};
use frictionloop::sysid::{estimate_gain, fit_second_order};
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grid = log_grid(1.0, 20_000.0, 200);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let t = make_second_order(
            rng.random_range(0.5..1.5),
            rng.random_range(100.0..5000.0),
            rng.random_range(0.2..1.0),
        )
        .unwrap();
        let l = make_second_order(
            1.0,
            rng.random_range(1000.0..10_000.0),
            rng.random_range(0.3..1.0),
        )
        .unwrap();
        let g = make_second_order(
            1.0,
            rng.random_range(1000.0..10_000.0),
            rng.random_range(0.05..0.7),
        )
        .unwrap();
        let p = RationalTF::constant(rng.random_range(0.01..0.2));
        let c = synthesize_ideal(&t, &p, &l, &g).unwrap();
        for &f in &grid {
            let (cv, pv) = (c.at_hz(f).unwrap(), p.at_hz(f).unwrap());
            let lg = l.at_hz(f).unwrap() * g.at_hz(f).unwrap();
            let back = cv * pv / (1.0 + cv * pv * lg);
            let want = t.at_hz(f).unwrap();
            worst = worst.max((back - want).norm() / want.norm());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 5.0,
        format!("max relative error {worst:.2e} over 100 systems x 200 points, {secs:.2} s"),
    )
}

fn default_design() -> (
    frictionloop::lti::DiscreteFilter,
    frictionloop::controller::DesignReport,
) {
    let cfg = PlantConfig::default();
    design_discrete(
        &DesignTarget::default(),
        &RationalTF::constant(cfg.p_nominal),
        &cfg.l,
        &cfg.g,
    )
    .unwrap()
}

fn c2_bandwidth() -> Outcome {
    let (_, report) = default_design();
    let bw = report
        .bandwidths
        .iter()
        .find(|b| (b.p - 0.06).abs() < 1e-12)
        .and_then(|b| b.bandwidth_hz);
    outcome(
        bw.is_some_and(|b| (800.0..=1200.0).contains(&b)),
        format!(
            "-3 dB point at P = 0.06 N/mA: {:.1} Hz",
            bw.unwrap_or(f64::NAN)
        ),
    )
}

fn c3_stability() -> Outcome {
    let (c, report) = default_design();
    let cfg = PlantConfig::default();
    let fs = 10_000.0;
    let x = zoh_discretize(&cfg.g.mul(&cfg.l), fs)
        .unwrap()
        .to_filter()
        .unwrap();
    let grid = log_grid(0.01, 0.14, 20);
    let sl = SampledLoop::new(&cfg.l, &cfg.g, fs, 0).unwrap();
    let poles_ok = grid.iter().all(|&p| sl.is_stable(&c, p));
    let d = 0.05;
    let mut worst_peak = 0.0f64;
    let mut worst_tail = 0.0f64;
    for &p in &grid {
        let mut cr = c.runner();
        let mut xr = x.runner();
        let mut peak = 0.0f64;
        let mut tail = 0.0f64;
        for k in 0..100_000 {
            let dist = if k >= 10_000 { d } else { 0.0 };
            let y = xr.peek(0.0);
            let u = cr.step(-y);
            xr.step(p * u + dist);
            peak = peak.max(y.abs());
            if k >= 90_000 {
                tail = tail.max((y - 0.0).abs());
            }
        }
        worst_peak = worst_peak.max(peak / d);
        worst_tail = worst_tail.max(tail / d);
    }
    outcome(
        poles_ok && report.all_stable && worst_peak < 5.0 && worst_tail < 0.01,
        format!(
            "poles inside unit circle at all 20 gains: {poles_ok}; step disturbance peak {worst_peak:.2}x, residual after 9 s {worst_tail:.1e}x"
        ),
    )
}

fn c4_sweep() -> Outcome {
    let base = ExperimentConfig {
        duration_s: 10.0,
        seed: 4,
        ..ExperimentConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let table = run_sweep_grid(&base, &sweep_grid(), dir.path()).unwrap();
    let mut worst_mag = 0.0f64;
    let mut worst_delay = f64::NEG_INFINITY;
    let mut ok = table.rows.len() == 80;
    for r in &table.rows {
        let (Some(m), Some(dl)) = (r.magnitude, r.delay_ms) else {
            ok = false;
            continue;
        };
        if r.swipes < 3 {
            ok = false;
        }
        if r.frequency <= 250.0 + 1e-9 {
            worst_mag = worst_mag.max((m - 1.0).abs());
        }
        if r.frequency <= 100.0 + 1e-9 {
            worst_delay = worst_delay.max(dl);
        }
    }
    let hi = table
        .rows
        .iter()
        .filter(|r| r.frequency > 999.0)
        .filter_map(|r| r.magnitude)
        .fold(0.0, f64::max);
    outcome(
        ok && worst_mag <= 0.2 && worst_delay < 1.0,
        format!(
            "80 conditions in {:.1} s; max |ratio - 1| to 250 Hz {worst_mag:.3}, max delay to 100 Hz {worst_delay:.3} ms, ratio at 1 kHz {hi:.2}",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn c5_textures() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let design = build_controller(&ExperimentConfig::default()).unwrap();
    for (i, t) in TEXTURES.iter().enumerate() {
        let mut r2 = [0.0; 2];
        let mut lag = 0.0f64;
        for (j, mode) in [RunMode::Closed, RunMode::Open].into_iter().enumerate() {
            let cfg = ExperimentConfig {
                reference: ReferenceSpec::Texture {
                    label: t.label.into(),
                    rms: None,
                },
                duration_s: 20.0,
                seed: 500 + i as u64,
                mode,
                ..ExperimentConfig::default()
            };
            let run = run_loop(&cfg, &design.controller).unwrap();
            let rep = evaluate_tracking(&run.trace, &TrackingOptions::texture()).unwrap();
            r2[j] = rep.r2;
            if mode == RunMode::Closed {
                lag = rep.lag_s;
            }
        }
        let pass = r2[0] >= 0.9 && r2[0] > r2[1] && lag.abs() <= 0.001;
        ok &= pass;
        parts.push(format!(
            "{} {:.3}/{:.3} lag {:.1} ms",
            t.label,
            r2[0],
            r2[1],
            lag * 1e3
        ));
    }
    outcome(ok, format!("closed/open R2: {}", parts.join(", ")))
}

fn c6_mitigation() -> Outcome {
    let cfg = PlantConfig::default();
    let (c, _) = default_design();
    let mut plant = init_plant(&cfg, 6).unwrap();
    let mut ctl = ControlLoop::new(&c, LoopMode::Closed, DEFAULT_WINDOW, 0);
    let mut obs = plant.observe();
    let mut prev = obs.contact;
    let mut onset: Option<usize> = None;
    let mut errs: Vec<f64> = Vec::new();
    let mut worst_dc = 0.0f64;
    let mut neutral_ok = true;
    let mut onsets = 0;
    let baseline = cfg.mu * cfg.w_profile.at(0.0);
    for k in 0..125_000 {
        let out = ctl.step(0.0, obs.f_m, obs.contact);
        if obs.contact != ContactState::FullSlip && out.u != U_NEUTRAL {
            neutral_ok = false;
        }
        if obs.contact == ContactState::FullSlip && prev != ContactState::FullSlip {
            onset = Some(k);
            onsets += 1;
            errs.clear();
        }
        if let Some(o) = onset {
            let since = k - o;
            if since < DEFAULT_WINDOW && out.u != U_NEUTRAL {
                neutral_ok = false;
            }
            if (100..200).contains(&since) {
                errs.push(out.corrected_error.unwrap_or(f64::NAN));
            }
            if since == 200 {
                let dc = errs.iter().sum::<f64>() / errs.len() as f64;
                worst_dc = worst_dc.max(dc.abs());
            }
        }
        prev = obs.contact;
        obs = plant.step(out.u, 0.0, None).unwrap();
    }
    outcome(
        onsets >= 8 && neutral_ok && worst_dc < 0.05 * baseline,
        format!(
            "{onsets} full-slip onsets; worst mean corrected error 10-20 ms after onset {:.2e} N ({:.2}% of {baseline} N); u = 2.5 mA outside tracking: {neutral_ok}",
            worst_dc,
            100.0 * worst_dc / baseline
        ),
    )
}

fn c7_identification() -> Outcome {
    // second-order fit on clean data
    let truth = [
        (1.0, 4400.0, 0.1),
        (1.0, 5300.0, std::f64::consts::FRAC_1_SQRT_2),
        (2.5, 800.0, 0.3),
    ];
    let mut fit_err = 0.0f64;
    for (k, fnh, z) in truth {
        let tf = make_second_order(k, fnh, z).unwrap();
        let resp = frictionloop::lti::freq_response(&tf, &log_grid(10.0, 1.5 * fnh, 120)).unwrap();
        let fit = fit_second_order(&resp, (10.0, 1.5 * fnh)).unwrap();
        fit_err = fit_err
            .max((fit.gain / k - 1.0).abs())
            .max((fit.fn_hz / fnh - 1.0).abs())
            .max((fit.zeta / z - 1.0).abs());
    }
    // actuation gain from 20 simulated trials
    let planted = PlantConfig {
        p_nominal: 0.06,
        p_min: 0.06,
        p_max: 0.06,
        direction_asymmetry: 0.0,
        p_drift_std: 0.0,
        ..PlantConfig::default()
    };
    let trials = simulate_gain_trials(&planted, 70).unwrap();
    let est = estimate_gain(&trials).unwrap();
    let gain_err = (est.mean / 0.06 - 1.0).abs();
    // impulse records with a spread of hammer strengths
    let records = simulate_impulses(&planted, 15, (0.85, 1.15), 1e-5, 7).unwrap();
    let ch = characterize_impulses(&records, 0.1, (0.0, 10_000.0)).unwrap();
    let avg = &ch.average;
    let shift = avg.shifts_db.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let fn_err = (ch.fit.fn_hz / 4400.0 - 1.0).abs();
    outcome(
        fit_err <= 0.01 && gain_err <= 0.02 && shift <= 3.0 && avg.warnings.is_empty() && fn_err <= 0.05,
        format!(
            "fit parameter error {:.2e}; P estimate {:.5} N/mA ({:.2}% off, 20 trials); max impulse power shift {shift:.2} dB; G from impulses {:.0} Hz, zeta {:.3}",
            fit_err,
            est.mean,
            100.0 * gain_err,
            ch.fit.fn_hz,
            ch.fit.zeta
        ),
    )
}

fn c8_noise() -> Outcome {
    let cfg = PlantConfig {
        kinematics: Kinematics::Frozen,
        ..PlantConfig::default()
    };
    let mut plant = init_plant(&cfg, 8).unwrap();
    let n = (60.0 * cfg.control_fs) as usize;
    let mut f_m = Vec::with_capacity(n);
    for _ in 0..n {
        f_m.push(plant.step(0.0, 0.0, None).unwrap().f_m);
    }
    let sp = amplitude_spectrum(
        &Signal::new(f_m, cfg.control_fs, Unit::Newton).unwrap(),
        1.0,
    )
    .unwrap();
    let a10 = sp.at(10.0).unwrap();
    let a1k = sp.at(1000.0).unwrap();
    let within = |a: f64, target: f64| (0.5 * target..=1.5 * target).contains(&a);
    outcome(
        within(a10, 1e-3) && within(a1k, 1e-5),
        format!("amplitude spectrum over 60 s: {a10:.3e} N at 10 Hz, {a1k:.3e} N at 1 kHz"),
    )
}

fn c9_properties() -> Outcome {
    let cfg = || Config {
        cases: 100,
        failure_persistence: None,
        ..Config::default()
    };
    let mut failures = Vec::new();
    let mut record = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };
    record(
        "lock-in linearity",
        TestRunner::new(cfg())
            .run(&lockin_linearity_inputs(), check_lockin_linearity)
            .map_err(|e| e.to_string()),
    );
    record(
        "lock-in phase",
        TestRunner::new(cfg())
            .run(&lockin_phase_inputs(), check_lockin_phase)
            .map_err(|e| e.to_string()),
    );
    record(
        "zero-phase lag",
        TestRunner::new(cfg())
            .run(&zero_phase_inputs(), check_zero_phase_lag)
            .map_err(|e| e.to_string()),
    );
    record(
        "xcorr lag",
        TestRunner::new(cfg())
            .run(&xcorr_inputs(), check_xcorr_lag)
            .map_err(|e| e.to_string()),
    );
    record(
        "determinism",
        TestRunner::new(cfg())
            .run(&proptest::num::u64::ANY, check_determinism)
            .map_err(|e| e.to_string()),
    );
    let ok = failures.is_empty();
    outcome(
        ok,
        if ok {
            "5 suites x 100 cases: lock-in linearity, lock-in phase, zero-phase lag, xcorr lag, determinism".into()
        } else {
            failures.join("; ")
        },
    )
}

#[test]
fn acceptance() {
    let checks: [(&str, Check); 9] = [
        ("1 algebraic identity", c1_identity),
        ("2 design bandwidth", c2_bandwidth),
        ("3 robust stability", c3_stability),
        ("4 sensitivity sweep", c4_sweep),
        ("5 texture tracking", c5_textures),
        ("6 DC mitigation", c6_mitigation),
        ("7 identification", c7_identification),
        ("8 noise model", c8_noise),
        ("9 property suites", c9_properties),
    ];
    let mut failed = Vec::new();
    for (name, check) in checks {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        // straight to the stdout handle so the lines show without --nocapture
        let mut out = std::io::stdout().lock();
        writeln!(
            out,
            "{tag} criterion {name}: {} [{:.1} s]",
            o.detail,
            start.elapsed().as_secs_f64()
        )
        .unwrap();
        out.flush().unwrap();
        if !o.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn open_loop_mode_is_selectable() {
    let cfg = ExperimentConfig {
        mode: RunMode::Open,
        controller: ControllerSpec::Design(DesignTarget::default()),
        duration_s: 0.5,
        seed: 3,
        ..ExperimentConfig::default()
    };
    let rec = build_controller(&cfg).unwrap();
    let run = run_loop(&cfg, &rec.controller).unwrap();
    assert!(run.abort.is_none());
    assert_eq!(run.trace.len(), 5000);
}
