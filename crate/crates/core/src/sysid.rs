//! Characterization of the measurement chain and the actuation gain.

use crate::error::{Error, Result};
use crate::lti::{make_second_order, FrequencyResponse, RationalTF, Signal};
use crate::optim::{levenberg_marquardt, LmOptions};
use crate::plant::Direction;
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Amplitude and phase of one frequency component, with the signal modeled
/// as `amplitude * sin(2 pi f t + phase)` and `t = 0` at the first sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockInResult {
    pub frequency: f64,
    pub amplitude: f64,
    /// Degrees in (-180, 180].
    pub phase: f64,
}

/// Wraps an angle in degrees into (-180, 180].
pub fn wrap_deg(x: f64) -> f64 {
    let w = x.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Digital lock-in at `f_ref`.
///
/// The record is cut to a whole number of reference periods, then projected
/// by least squares onto `sin`, `cos` and a constant. On whole periods this is
/// the classic quadrature demodulation; the projection also stays exact when
/// the sample rate is not a multiple of `f_ref`.
pub fn lock_in(signal: &Signal, f_ref: f64) -> Result<LockInResult> {
    let fs = signal.fs();
    if !(f_ref > 0.0 && f_ref < fs / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "reference {f_ref} Hz must lie in (0, {})",
            fs / 2.0
        )));
    }
    let periods = (signal.duration() * f_ref + 1e-9).floor();
    if periods < 10.0 {
        return Err(Error::InsufficientData(format!(
            "{:.2} periods of {f_ref} Hz available, need 10",
            signal.duration() * f_ref
        )));
    }
    let n = ((periods * fs / f_ref).round() as usize).min(signal.len());
    let w = 2.0 * PI * f_ref / fs;
    let mut m = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for (i, &x) in signal.samples()[..n].iter().enumerate() {
        let (s, c) = (w * i as f64).sin_cos();
        let v = Vector3::new(s, c, 1.0);
        m += v * v.transpose();
        rhs += v * x;
    }
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InsufficientData("degenerate lock-in projection".into()))?;
    let (i_part, q_part) = (sol[0], sol[1]);
    let amplitude = i_part.hypot(q_part);
    let phase = if amplitude > 0.0 {
        wrap_deg(q_part.atan2(i_part).to_degrees())
    } else {
        0.0
    };
    Ok(LockInResult {
        frequency: f_ref,
        amplitude,
        phase,
    })
}

/// Options for [`average_impulse_spectra_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseOptions {
    /// Leading span used to measure the pre-trigger noise, s.
    pub pretrigger_s: f64,
    /// Onset is the first sample above this multiple of the pre-trigger RMS.
    pub onset_factor: f64,
    /// Band over which record powers are equalized, Hz.
    pub band: (f64, f64),
    /// Power shift above which a record is flagged, dB.
    pub max_shift_db: f64,
}

impl Default for ImpulseOptions {
    fn default() -> Self {
        Self {
            pretrigger_s: 0.02,
            onset_factor: 10.0,
            band: (10.0, 1000.0),
            max_shift_db: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseAverage {
    /// Mean spectrum scaled to the first record, in signal units per unit
    /// impulse area (`DFT / fs`).
    pub response: FrequencyResponse,
    /// Band power of each record relative to the first, dB.
    pub shifts_db: Vec<f64>,
    /// Onset sample index of each record.
    pub onsets: Vec<usize>,
    pub warnings: Vec<String>,
}

pub fn average_impulse_spectra(impulses: &[Signal], window_s: f64) -> Result<ImpulseAverage> {
    average_impulse_spectra_with(impulses, window_s, &ImpulseOptions::default())
}

pub fn average_impulse_spectra_with(
    impulses: &[Signal],
    window_s: f64,
    opts: &ImpulseOptions,
) -> Result<ImpulseAverage> {
    if impulses.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least two impulse records".into(),
        ));
    }
    let fs = impulses[0].fs();
    if impulses.iter().any(|s| (s.fs() - fs).abs() > 1e-9 * fs) {
        return Err(Error::RateMismatch {
            expected: fs,
            actual: impulses
                .iter()
                .map(Signal::fs)
                .find(|r| (r - fs).abs() > 1e-9 * fs)
                .unwrap_or(fs),
        });
    }
    let n = (window_s * fs).round() as usize;
    if n < 4 {
        return Err(Error::InvalidParameter(format!(
            "window {window_s} s is too short"
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let df = fs / n as f64;
    let kmax = (n - 1) / 2;
    let in_band: Vec<usize> = (1..=kmax)
        .filter(|&k| {
            let f = k as f64 * df;
            f >= opts.band.0 && f <= opts.band.1
        })
        .collect();
    if in_band.is_empty() {
        return Err(Error::InvalidParameter(
            "no spectral bins inside the normalization band".into(),
        ));
    }
    let pre = ((opts.pretrigger_s * fs).round() as usize).max(1);
    let mut spectra = Vec::with_capacity(impulses.len());
    let mut onsets = Vec::with_capacity(impulses.len());
    for (idx, rec) in impulses.iter().enumerate() {
        let x = rec.samples();
        let p = pre.min(x.len());
        let rms = (x[..p].iter().map(|v| v * v).sum::<f64>() / p as f64).sqrt();
        let thr = opts.onset_factor * rms;
        let onset = x
            .iter()
            .position(|v| v.abs() > thr)
            .ok_or_else(|| Error::InsufficientData(format!("record {idx}: no impact found")))?;
        if onset + n > x.len() {
            return Err(Error::InsufficientData(format!(
                "record {idx}: {} samples after onset, window needs {n}",
                x.len() - onset
            )));
        }
        let mut buf: Vec<Complex64> = x[onset..onset + n]
            .iter()
            .map(|&v| Complex64::new(v / fs, 0.0))
            .collect();
        fft.process(&mut buf);
        spectra.push(buf);
        onsets.push(onset);
    }
    let band_power = |s: &[Complex64]| in_band.iter().map(|&k| s[k].norm_sqr()).sum::<f64>();
    let p0 = band_power(&spectra[0]);
    if !(p0 > 0.0) {
        return Err(Error::InsufficientData(
            "first record has no in-band energy".into(),
        ));
    }
    let mut shifts_db = Vec::with_capacity(spectra.len());
    let mut warnings = Vec::new();
    let mut mean = vec![Complex64::new(0.0, 0.0); kmax];
    for (idx, s) in spectra.iter().enumerate() {
        let p = band_power(s);
        if !(p > 0.0) {
            return Err(Error::InsufficientData(format!(
                "record {idx} has no in-band energy"
            )));
        }
        let shift = 10.0 * (p / p0).log10();
        if shift.abs() > opts.max_shift_db {
            warnings.push(format!(
                "record {idx}: power shift {shift:.2} dB exceeds {:.1} dB",
                opts.max_shift_db
            ));
        }
        shifts_db.push(shift);
        let scale = (p0 / p).sqrt();
        for k in 1..=kmax {
            mean[k - 1] += s[k] * scale;
        }
    }
    let count = spectra.len() as f64;
    let freqs: Vec<f64> = (1..=kmax).map(|k| k as f64 * df).collect();
    let values = mean.into_iter().map(|v| v / count).collect();
    Ok(ImpulseAverage {
        response: FrequencyResponse::new(freqs, values)?,
        shifts_db,
        onsets,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderFit {
    pub tf: RationalTF,
    pub gain: f64,
    pub fn_hz: f64,
    pub zeta: f64,
    /// Sum of squared ln-magnitude and phase (radian) errors over the band.
    pub residual: f64,
    /// The resonance sits far above the data (more than ten times the upper
    /// band edge), so `fn_hz` and `zeta` are poorly determined.
    pub low_confidence: bool,
    pub converged: bool,
}

fn second_order_at(k: f64, fn_hz: f64, zeta: f64, f: f64) -> Complex64 {
    let r = f / fn_hz;
    Complex64::new(k, 0.0) / Complex64::new(1.0 - r * r, 2.0 * zeta * r)
}

/// Least-squares fit of `k wn^2 / (s^2 + 2 zeta wn s + wn^2)` to `resp`
/// inside `band`. A lower edge of 0 means "from the first available point".
pub fn fit_second_order(resp: &FrequencyResponse, band: (f64, f64)) -> Result<SecondOrderFit> {
    let pts: Vec<(f64, Complex64)> = resp
        .iter()
        .filter(|(f, _)| *f >= band.0 && *f <= band.1)
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} points inside the band, need 10",
            pts.len()
        )));
    }
    if pts.iter().any(|(_, v)| !(v.norm() > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(
            "response must be finite and nonzero".into(),
        ));
    }
    let residuals = |p: &[f64]| -> Vec<f64> {
        let (k, fnh, z) = (p[0].exp(), p[1].exp(), p[2].exp());
        let mut re = Vec::with_capacity(2 * pts.len());
        let mut im = Vec::with_capacity(pts.len());
        for &(f, v) in &pts {
            let q = second_order_at(k, fnh, z, f) / v;
            re.push(q.norm().ln());
            im.push(q.arg());
        }
        re.extend(im);
        re
    };
    let cost = |p: &[f64]| residuals(p).iter().map(|r| r * r).sum::<f64>();
    let f_lo = pts[0].0;
    let f_hi = pts[pts.len() - 1].0;
    let k0 = pts[0].1.norm();
    // coarse grid for a starting point
    let mut start = [k0.ln(), f_hi.ln(), 0.3f64.ln()];
    let mut best = f64::INFINITY;
    for i in 0..40 {
        let fnh = f_lo * (100.0 * f_hi / f_lo).powf(i as f64 / 39.0);
        for z in [0.02, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0, 2.0] {
            let p = [k0.ln(), fnh.ln(), f64::ln(z)];
            let c = cost(&p);
            if c < best {
                best = c;
                start = p;
            }
        }
    }
    let res = levenberg_marquardt(residuals, &start, LmOptions::default());
    if !res.cost.is_finite() {
        return Err(Error::FitFailure {
            residual: res.cost,
            reason: "second-order fit diverged".into(),
        });
    }
    let (gain, fn_hz, zeta) = (
        res.params[0].exp(),
        res.params[1].exp(),
        res.params[2].exp(),
    );
    let tf = make_second_order(gain, fn_hz, zeta).map_err(|_| Error::FitFailure {
        residual: res.cost,
        reason: format!("invalid optimum fn = {fn_hz}, zeta = {zeta}"),
    })?;
    Ok(SecondOrderFit {
        tf,
        gain,
        fn_hz,
        zeta,
        residual: res.cost,
        low_confidence: fn_hz > 10.0 * band.1.min(f_hi.max(band.1)),
        converged: res.converged,
    })
}

/// One actuation-gain trial: a biased single-tone drive and the force it
/// produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTrial {
    pub drive: Signal,
    pub force: Signal,
    pub frequency: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialGain {
    pub frequency: f64,
    pub gain: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    /// Arithmetic mean of the per-trial gains, N/mA.
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub per_trial: Vec<TrialGain>,
}

fn trial_gain(index: usize, t: &GainTrial) -> Result<TrialGain> {
    let invalid = |reason: String| Error::InvalidTrial { index, reason };
    let d = lock_in(&t.drive, t.frequency).map_err(|e| invalid(e.to_string()))?;
    if !(d.amplitude > 1e-12) {
        return Err(invalid(
            "drive has no component at the modulation frequency".into(),
        ));
    }
    let f = lock_in(&t.force, t.frequency).map_err(|e| invalid(e.to_string()))?;
    let gain = f.amplitude / d.amplitude;
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(invalid(format!("gain {gain} is not positive")));
    }
    Ok(TrialGain {
        frequency: t.frequency,
        gain,
        direction: t.direction,
    })
}

/// Per-trial gain is the force lock-in amplitude over the drive lock-in
/// amplitude at the modulation frequency.
pub fn estimate_gain(trials: &[GainTrial]) -> Result<GainEstimate> {
    if trials.is_empty() {
        return Err(Error::InsufficientData("no gain trials".into()));
    }
    #[cfg(feature = "parallel")]
    let per: Vec<Result<TrialGain>> = {
        use rayon::prelude::*;
        trials
            .par_iter()
            .enumerate()
            .map(|(i, t)| trial_gain(i, t))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per: Vec<Result<TrialGain>> = trials
        .iter()
        .enumerate()
        .map(|(i, t)| trial_gain(i, t))
        .collect();
    let per_trial = per.into_iter().collect::<Result<Vec<_>>>()?;
    let gains = per_trial.iter().map(|t| t.gain);
    let mean = gains.clone().sum::<f64>() / per_trial.len() as f64;
    let min = gains.clone().fold(f64::INFINITY, f64::min);
    let max = gains.fold(0.0, f64::max);
    Ok(GainEstimate {
        mean,
        min,
        max,
        per_trial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{freq_response, log_grid, Unit};

    fn sine(a: f64, f: f64, ph_deg: f64, dur: f64, fs: f64) -> Signal {
        let n = (dur * fs) as usize;
        let x = (0..n)
            .map(|i| a * (2.0 * PI * f * i as f64 / fs + ph_deg.to_radians()).sin())
            .collect();
        Signal::new(x, fs, Unit::Newton).unwrap()
    }

    #[test]
    fn lock_in_exact_sinusoid() {
        let r = lock_in(&sine(0.02, 100.0, 30.0, 10.0, 10_000.0), 100.0).unwrap();
        assert!((r.amplitude - 0.02).abs() < 1e-6);
        assert!((r.phase - 30.0).abs() < 1e-6);
    }

    #[test]
    fn lock_in_rejects_dc_and_short_records() {
        let dc = Signal::new(vec![0.7; 10_000], 10_000.0, Unit::Newton).unwrap();
        assert!(lock_in(&dc, 100.0).unwrap().amplitude < 1e-9);
        let short = sine(1.0, 100.0, 0.0, 0.05, 10_000.0);
        assert!(matches!(
            lock_in(&short, 100.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn wraps_phase() {
        assert_eq!(wrap_deg(180.0), 180.0);
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert!((wrap_deg(190.0) + 170.0).abs() < 1e-12);
    }

    #[test]
    fn second_order_roundtrip() {
        let truth = make_second_order(1.0, 4400.0, 0.05).unwrap();
        let resp = freq_response(&truth, &log_grid(10.0, 1000.0, 100)).unwrap();
        let fit = fit_second_order(&resp, (10.0, 1000.0)).unwrap();
        assert!((fit.gain - 1.0).abs() < 0.01);
        assert!((fit.fn_hz / 4400.0 - 1.0).abs() < 0.01, "{}", fit.fn_hz);
        assert!((fit.zeta / 0.05 - 1.0).abs() < 0.01, "{}", fit.zeta);
        assert!(fit.residual <= 1e-10);
        assert!(!fit.low_confidence);
    }

    #[test]
    fn flat_response_is_low_confidence() {
        let grid = log_grid(10.0, 1000.0, 50);
        let resp = FrequencyResponse::new(grid, vec![Complex64::new(1.0, 0.0); 50]).unwrap();
        let fit = fit_second_order(&resp, (10.0, 1000.0)).unwrap();
        assert!(fit.low_confidence, "fn = {}", fit.fn_hz);
    }

    #[test]
    fn wide_band_l_fit() {
        let truth = make_second_order(1.0, 5300.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let resp = freq_response(&truth, &log_grid(1.0, 6000.0, 120)).unwrap();
        let fit = fit_second_order(&resp, (0.0, 6000.0)).unwrap();
        assert!((fit.fn_hz / 5300.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_force_trial_rejected() {
        let fs = 10_000.0;
        let drive = sine(0.5, 20.0, 0.0, 1.0, fs);
        let force = Signal::new(vec![0.0; 10_000], fs, Unit::Newton).unwrap();
        let trial = GainTrial {
            drive,
            force,
            frequency: 20.0,
            direction: Direction::Right,
        };
        assert!(matches!(
            estimate_gain(&[trial]),
            Err(Error::InvalidTrial { index: 0, .. })
        ));
    }

    #[test]
    fn identical_impulses_have_zero_shift() {
        let fs = 10_000.0;
        let mut x = vec![0.0; 8000];
        for (i, v) in x.iter_mut().enumerate().skip(500) {
            let t = (i - 500) as f64 / fs;
            *v = (-200.0 * t).exp() * (2.0 * PI * 300.0 * t).sin()
                + if i == 500 { 1.0 } else { 0.0 };
        }
        let s = Signal::new(x, fs, Unit::Newton).unwrap();
        let avg = average_impulse_spectra(&vec![s.clone(); 15], 0.5).unwrap();
        assert!(avg.shifts_db.iter().all(|d| d.abs() < 1e-12));
        assert!(avg.warnings.is_empty());
        let single = average_impulse_spectra(&[s.clone(), s], 0.5).unwrap();
        for (a, b) in avg.response.values().iter().zip(single.response.values()) {
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
        }
    }
}
