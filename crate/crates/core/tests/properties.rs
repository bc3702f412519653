mod common;

use common::*;
use frictionloop::analysis::{bandpass_zero_phase, r_squared};
use frictionloop::controller::{closed_loop_T, synthesize_ideal, DesignTarget, SampledLoop};
use frictionloop::lti::{freq_response, log_grid, make_second_order, DiscreteFilter, RationalTF};
use frictionloop::plant::default_l;
use frictionloop::sysid::fit_second_order;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lockin_is_linear(input in lockin_linearity_inputs()) {
        check_lockin_linearity(input)?;
    }

    #[test]
    fn lockin_phase_follows_input(input in lockin_phase_inputs()) {
        check_lockin_phase(input)?;
    }

    #[test]
    fn zero_phase_bandpass_has_no_lag(tones in zero_phase_inputs()) {
        check_zero_phase_lag(tones)?;
    }

    #[test]
    fn xcorr_recovers_integer_lag(input in xcorr_inputs()) {
        check_xcorr_lag(input)?;
    }

    #[test]
    fn r_squared_ignores_affine_maps(
        x in prop::collection::vec(-1.0..1.0f64, 50..400),
        a in prop::sample::select(vec![-3.0, -0.5, 0.2, 1.0, 7.0]),
        b in -5.0..5.0f64,
        noise in prop::collection::vec(-0.2..0.2f64, 400),
    ) {
        let y: Vec<f64> = x.iter().zip(&noise).map(|(u, e)| u + e).collect();
        let r0 = r_squared(&newton(x.clone(), FS), &newton(y.clone(), FS)).unwrap();
        let z: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let r1 = r_squared(&newton(x, FS), &newton(z, FS)).unwrap();
        prop_assert!(r0 <= 1.0);
        prop_assert!((r0 - r1).abs() < 1e-9, "{r0} vs {r1}");
    }

    #[test]
    fn ideal_controller_reproduces_target(
        k in 0.5..1.5f64, ft in 100.0..5000.0f64, zt in 0.2..1.0f64,
        fl in 1000.0..10_000.0f64, zl in 0.3..1.0f64,
        fg in 1000.0..10_000.0f64, zg in 0.05..0.7f64,
        p in 0.01..0.2f64,
    ) {
        let t = make_second_order(k, ft, zt).unwrap();
        let l = make_second_order(1.0, fl, zl).unwrap();
        let g = make_second_order(1.0, fg, zg).unwrap();
        let pt = RationalTF::constant(p);
        let c = synthesize_ideal(&t, &pt, &l, &g).unwrap();
        let back = closed_loop_T(&c, &pt, &l, &g).unwrap();
        for f in log_grid(1.0, 20_000.0, 50) {
            let want = t.at_hz(f).unwrap();
            let got = back.at_hz(f).unwrap();
            prop_assert!((want - got).norm() <= 1e-7 * want.norm(), "{f} Hz: {got} vs {want}");
        }
    }

    #[test]
    fn second_order_fit_roundtrip(
        k in 0.2..5.0f64, fnh in 500.0..6000.0f64, z in 0.05..1.0f64,
    ) {
        let truth = make_second_order(k, fnh, z).unwrap();
        let resp = freq_response(&truth, &log_grid(10.0, 3000.0, 80)).unwrap();
        let fit = fit_second_order(&resp, (10.0, 3000.0)).unwrap();
        let fitted = freq_response(&fit.tf, resp.freqs()).unwrap();
        for (a, b) in fitted.values().iter().zip(resp.values()) {
            prop_assert!((20.0 * (a.norm() / b.norm()).log10()).abs() < 0.1);
            prop_assert!(((a / b).arg().to_degrees()).abs() < 1.0);
        }
    }

    #[test]
    fn zero_phase_filter_applied_twice_squares_the_response(f in 30.0..600.0f64) {
        let x = newton((0..20_000).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / FS).sin()).collect(), FS);
        let once = bandpass_zero_phase(&x, 10.0, 1000.0).unwrap();
        let twice = bandpass_zero_phase(&once, 10.0, 1000.0).unwrap();
        let rms = |s: &[f64]| (s[5000..15_000].iter().map(|v| v * v).sum::<f64>() / 10_000.0).sqrt();
        let g1 = 20.0 * (rms(once.samples()) / rms(x.samples())).log10();
        let g2 = 20.0 * (rms(twice.samples()) / rms(x.samples())).log10();
        prop_assert!((g2 - 2.0 * g1).abs() < 0.1, "{g1} {g2}");
    }

    #[test]
    fn bibo_discrete_filter_output_bounded(
        r in 0.0..0.99f64, th in 0.0..3.1f64, b0 in -2.0..2.0f64, b1 in -2.0..2.0f64,
        x in prop::collection::vec(-1.0..1.0f64, 200..600),
    ) {
        // l1 norm of the impulse response bounds the output for |x| <= 1
        let f = DiscreteFilter::new(vec![b0, b1], vec![1.0, -2.0 * r * th.cos(), r * r], FS).unwrap();
        let mut imp = f.runner();
        let l1: f64 = (0..5000).map(|i| imp.step(if i == 0 { 1.0 } else { 0.0 }).abs()).sum();
        let mut run = f.runner();
        for v in x {
            prop_assert!(run.step(v).abs() <= l1 + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn same_seed_same_bytes(seed in any::<u64>()) {
        check_determinism(seed)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// Lowering the actuation gain below the design value never destabilizes
    /// the default design.
    #[test]
    fn lower_gain_stays_stable(scale in 0.05..1.0f64) {
        let target = DesignTarget::default();
        let cfg = frictionloop::plant::PlantConfig::default();
        let (c, _) = frictionloop::controller::design_discrete(
            &target, &RationalTF::constant(0.06), &default_l(), &cfg.g,
        ).unwrap();
        let sl = SampledLoop::new(&cfg.l, &cfg.g, target.fs, 0).unwrap();
        prop_assert!(sl.is_stable(&c, target.p_range.1 * scale));
    }
}
