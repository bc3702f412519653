//! Post-hoc evaluation of recorded traces.
//!
//! The tracking pipeline runs in a fixed order: segment the swipes on a
//! low-passed copy of the measured force, filter reference and measurement
//! with a zero-phase filter, align them by cross-correlation over the
//! retained middle halves of the swipes, then score the linear fit.

use crate::error::{Error, Result};
use crate::lti::{DiscreteFilter, Signal};
use crate::plant::Direction;
use crate::sysid::{lock_in, wrap_deg};
use crate::trace::Trace;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Zero crossings closer than this are treated as one.
pub const DEFAULT_DEBOUNCE_S: f64 = 0.05;

/// Cutoff of the low-pass used before zero-crossing segmentation.
pub const SEGMENT_CUTOFF_HZ: f64 = 10.0;

/// Second-order Butterworth low-pass, bilinear transform with prewarping.
pub fn butter2_lowpass(fc: f64, fs: f64) -> Result<DiscreteFilter> {
    check_cutoff(fc, fs)?;
    let k = (PI * fc / fs).tan();
    let norm = 1.0 + SQRT_2 * k + k * k;
    let g = k * k / norm;
    DiscreteFilter::new(
        vec![g, 2.0 * g, g],
        vec![
            1.0,
            2.0 * (k * k - 1.0) / norm,
            (1.0 - SQRT_2 * k + k * k) / norm,
        ],
        fs,
    )
}

/// Second-order Butterworth high-pass, bilinear transform with prewarping.
pub fn butter2_highpass(fc: f64, fs: f64) -> Result<DiscreteFilter> {
    check_cutoff(fc, fs)?;
    let k = (PI * fc / fs).tan();
    let norm = 1.0 + SQRT_2 * k + k * k;
    let g = 1.0 / norm;
    DiscreteFilter::new(
        vec![g, -2.0 * g, g],
        vec![
            1.0,
            2.0 * (k * k - 1.0) / norm,
            (1.0 - SQRT_2 * k + k * k) / norm,
        ],
        fs,
    )
}

fn check_cutoff(fc: f64, fs: f64) -> Result<()> {
    if !(fc > 0.0 && fc < fs / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff {fc} Hz must lie in (0, {})",
            fs / 2.0
        )));
    }
    Ok(())
}

/// Padding, in samples, covering three 1% settling times of a second-order
/// Butterworth section with cutoff `fc`.
fn settle_pad(fc: f64, fs: f64) -> usize {
    let sigma = 2.0 * PI * fc / SQRT_2;
    (3.0 * 100f64.ln() / sigma * fs).ceil() as usize
}

fn run_sections(sections: &[DiscreteFilter], x: &mut [f64]) {
    for f in sections {
        let mut r = f.runner();
        r.settle(x[0]);
        for v in x.iter_mut() {
            *v = r.step(*v);
        }
    }
}

fn filtfilt(sections: &[DiscreteFilter], x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = pad.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
    run_sections(sections, &mut ext);
    ext.reverse();
    run_sections(sections, &mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Forward-backward second-order Butterworth band-pass (a high-pass at `lo`
/// cascaded with a low-pass at `hi`), with odd reflection padding at both
/// ends.
pub fn bandpass_zero_phase(x: &Signal, lo: f64, hi: f64) -> Result<Signal> {
    let fs = x.fs();
    if !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "band [{lo}, {hi}] Hz must satisfy 0 < lo < hi < {}",
            fs / 2.0
        )));
    }
    let sections = [butter2_highpass(lo, fs)?, butter2_lowpass(hi, fs)?];
    let y = filtfilt(&sections, x.samples(), settle_pad(lo, fs));
    x.with_samples(y)
}

/// Forward-backward second-order Butterworth low-pass.
pub fn lowpass_zero_phase(x: &Signal, fc: f64) -> Result<Signal> {
    let fs = x.fs();
    let sections = [butter2_lowpass(fc, fs)?];
    let y = filtfilt(&sections, x.samples(), settle_pad(fc, fs));
    x.with_samples(y)
}

/// One swipe between consecutive friction zero crossings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwipeSegment {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub direction: Direction,
    /// Centered half of the swipe, `[keep_start, keep_end)`.
    pub keep_start: usize,
    pub keep_end: usize,
}

impl SwipeSegment {
    fn new(start: usize, end: usize, direction: Direction) -> Self {
        let len = end - start;
        let keep_start = start + len / 4;
        Self {
            start,
            end,
            direction,
            keep_start,
            keep_end: keep_start + len / 2,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn keep_len(&self) -> usize {
        self.keep_end - self.keep_start
    }
}

pub fn segment_swipes(f: &Signal) -> Vec<SwipeSegment> {
    segment_swipes_with(f, DEFAULT_DEBOUNCE_S)
}

/// Splits `f` (a low-passed friction force) at its zero crossings.
///
/// Crossings separated by less than `debounce_s` form one cluster; a cluster
/// with an even number of crossings is a blip and is dropped. The partial
/// swipes before the first and after the last crossing are not returned.
pub fn segment_swipes_with(f: &Signal, debounce_s: f64) -> Vec<SwipeSegment> {
    let x = f.samples();
    let gap = (debounce_s * f.fs()).round().max(1.0) as usize;
    let mut crossings = Vec::new();
    let mut last_sign = 0.0;
    for (i, &v) in x.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let s = v.signum();
        if last_sign != 0.0 && s != last_sign {
            crossings.push(i);
        }
        last_sign = s;
    }
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < crossings.len() {
        let mut j = i;
        while j + 1 < crossings.len() && crossings[j + 1] - crossings[j] < gap {
            j += 1;
        }
        if (j - i + 1) % 2 == 1 {
            cuts.push((crossings[i] + crossings[j]) / 2);
        }
        i = j + 1;
    }
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let sum: f64 = x[w[0]..w[1]].iter().sum();
            SwipeSegment::new(w[0], w[1], Direction::from_sign(sum))
        })
        .collect()
}

/// Boolean mask of the retained halves of `segments`.
pub fn retained_mask(segments: &[SwipeSegment], len: usize) -> Vec<bool> {
    let mut mask = vec![false; len];
    for s in segments {
        for m in &mut mask[s.keep_start.min(len)..s.keep_end.min(len)] {
            *m = true;
        }
    }
    mask
}

#[derive(Default)]
struct Moments {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Moments {
    fn add(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    fn var_x(&self) -> f64 {
        self.sxx - self.sx * self.sx / self.n
    }

    fn var_y(&self) -> f64 {
        self.syy - self.sy * self.sy / self.n
    }

    /// Variance is distinguishable from rounding noise.
    fn x_varies(&self) -> bool {
        self.var_x() > 1e-10 * self.sxx
    }

    fn cov(&self) -> f64 {
        self.sxy - self.sx * self.sy / self.n
    }

    fn pearson(&self) -> Option<f64> {
        let vx = self.var_x();
        let vy = self.var_y();
        if !(self.n >= 2.0 && self.x_varies() && vy > 1e-10 * self.syy) {
            return None;
        }
        Some(self.cov() / (vx * vy).sqrt())
    }
}

fn centered(x: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let (mut s, mut n) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        if mask.is_none_or(|m| m[i]) {
            s += v;
            n += 1.0;
        }
    }
    let mean = if n > 0.0 { s / n } else { 0.0 };
    x.iter().map(|v| v - mean).collect()
}

fn correlation_at(r: &[f64], m: &[f64], mask: Option<&[bool]>, k: isize) -> Option<f64> {
    let n = r.len() as isize;
    let mut mo = Moments::default();
    let lo = 0.max(-k);
    let hi = n.min(n - k);
    for i in lo..hi {
        let i = i as usize;
        if mask.is_none_or(|mk| mk[i]) {
            mo.add(r[i], m[(i as isize + k) as usize]);
        }
    }
    mo.pearson()
}

fn shift_edge(m: &[f64], k: isize) -> Vec<f64> {
    let n = m.len() as isize;
    (0..n)
        .map(|i| m[(i + k).clamp(0, n - 1) as usize])
        .collect()
}

fn check_pair(r: &Signal, m: &Signal) -> Result<()> {
    if (r.fs() - m.fs()).abs() > 1e-9 * r.fs() {
        return Err(Error::RateMismatch {
            expected: r.fs(),
            actual: m.fs(),
        });
    }
    if r.len() != m.len() {
        return Err(Error::InvalidParameter(format!(
            "length mismatch: {} vs {}",
            r.len(),
            m.len()
        )));
    }
    Ok(())
}

fn align_impl(
    r: &Signal,
    m: &Signal,
    max_lag_s: f64,
    mask: Option<&[bool]>,
) -> Result<(Signal, f64)> {
    check_pair(r, m)?;
    if !(max_lag_s >= 0.0) {
        return Err(Error::InvalidParameter("max lag must be >= 0".into()));
    }
    let kmax = (max_lag_s * r.fs() + 1e-9).floor() as isize;
    // Centering first keeps the running sums well conditioned.
    let rc = centered(r.samples(), mask);
    let mc = centered(m.samples(), None);
    let mut best: Option<(f64, isize)> = None;
    for k in -kmax..=kmax {
        if let Some(c) = correlation_at(&rc, &mc, mask, k) {
            let better = match best {
                None => true,
                Some((bc, bk)) => c > bc || (c == bc && k.abs() < bk.abs()),
            };
            if better {
                best = Some((c, k));
            }
        }
    }
    let (_, k) = best.ok_or_else(|| {
        Error::Alignment("zero variance in reference or measurement over the search window".into())
    })?;
    let shifted = m.with_samples(shift_edge(m.samples(), k))?;
    Ok((shifted, k as f64 / r.fs()))
}

/// Finds the lag in `[-max_lag_s, max_lag_s]` maximizing the Pearson
/// correlation between `reference[i]` and `meas[i + lag]`, and returns
/// `meas` advanced by that lag (edge samples repeated) together with the lag
/// in seconds. A positive lag means `meas` was late.
pub fn align_by_xcorr(reference: &Signal, meas: &Signal, max_lag_s: f64) -> Result<(Signal, f64)> {
    align_impl(reference, meas, max_lag_s, None)
}

/// [`align_by_xcorr`] restricted to reference samples where `mask` is set.
pub fn align_by_xcorr_masked(
    reference: &Signal,
    meas: &Signal,
    mask: &[bool],
    max_lag_s: f64,
) -> Result<(Signal, f64)> {
    if mask.len() != reference.len() {
        return Err(Error::InvalidParameter(
            "mask length must match the signal".into(),
        ));
    }
    align_impl(reference, meas, max_lag_s, Some(mask))
}

fn r2_impl(r: &Signal, m: &Signal, mask: Option<&[bool]>) -> Result<f64> {
    check_pair(r, m)?;
    let rc = centered(r.samples(), mask);
    let mc = centered(m.samples(), mask);
    let mut mo = Moments::default();
    for i in 0..rc.len() {
        if mask.is_none_or(|mk| mk[i]) {
            mo.add(rc[i], mc[i]);
        }
    }
    if !(mo.n >= 2.0 && mo.x_varies()) {
        return Err(Error::UndefinedMetric("reference has zero variance".into()));
    }
    Ok(mo.pearson().map_or(0.0, |c| (c * c).min(1.0)))
}

/// Coefficient of determination of the least-squares line `meas = a ref + b`.
pub fn r_squared(reference: &Signal, meas: &Signal) -> Result<f64> {
    r2_impl(reference, meas, None)
}

pub fn r_squared_masked(reference: &Signal, meas: &Signal, mask: &[bool]) -> Result<f64> {
    if mask.len() != reference.len() {
        return Err(Error::InvalidParameter(
            "mask length must match the signal".into(),
        ));
    }
    r2_impl(reference, meas, Some(mask))
}

/// Filtering applied to reference and measurement before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PostFilter {
    BandPass { lo: f64, hi: f64 },
    LowPass { cutoff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingOptions {
    pub preset: String,
    pub filter: PostFilter,
    pub max_lag_s: f64,
    pub segment_cutoff_hz: f64,
    pub debounce_s: f64,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        Self::texture()
    }
}

impl TrackingOptions {
    /// Band-pass 10 Hz to 1 kHz, for texture playback.
    pub fn texture() -> Self {
        Self {
            preset: "texture".into(),
            filter: PostFilter::BandPass {
                lo: 10.0,
                hi: 1000.0,
            },
            max_lag_s: 0.002,
            segment_cutoff_hz: SEGMENT_CUTOFF_HZ,
            debounce_s: DEFAULT_DEBOUNCE_S,
        }
    }

    /// Low-pass at 1 kHz only, for square-wave demonstrations.
    pub fn square_wave() -> Self {
        Self {
            preset: "square_wave".into(),
            filter: PostFilter::LowPass { cutoff: 1000.0 },
            ..Self::texture()
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "texture" => Ok(Self::texture()),
            "square_wave" | "square" => Ok(Self::square_wave()),
            other => Err(Error::Config(format!("unknown tracking preset '{other}'"))),
        }
    }

    fn apply(&self, x: &Signal) -> Result<Signal> {
        match self.filter {
            PostFilter::BandPass { lo, hi } => bandpass_zero_phase(x, lo, hi),
            PostFilter::LowPass { cutoff } => lowpass_zero_phase(x, cutoff),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwipeScore {
    pub start: usize,
    pub end: usize,
    pub direction: Direction,
    /// `None` when the reference is flat inside the retained window.
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub schema_version: u32,
    pub preset: String,
    pub fs: f64,
    /// Pooled over the retained halves of every complete swipe.
    pub r2: f64,
    pub lag_s: f64,
    pub max_lag_s: f64,
    pub retained_samples: usize,
    pub per_swipe: Vec<SwipeScore>,
}

/// Subtracts from each swipe the mean of its retained half.
fn remove_swipe_means(x: &mut [f64], segments: &[SwipeSegment]) {
    for s in segments.iter().filter(|s| s.keep_len() > 0) {
        let mean = x[s.keep_start..s.keep_end].iter().sum::<f64>() / s.keep_len() as f64;
        x[s.start..s.end].iter_mut().for_each(|v| *v -= mean);
    }
}

/// Scores how well the measured force follows the reference in `trace`.
///
/// After filtering, each swipe has the mean of its retained half removed
/// from both signals, so the direction-dependent friction offset does not
/// count as tracking.
pub fn evaluate_tracking(trace: &Trace, opts: &TrackingOptions) -> Result<TrackingReport> {
    let fr = trace.reference()?;
    let fm = trace.measured()?;
    let segs = segment_swipes_with(
        &lowpass_zero_phase(&fm, opts.segment_cutoff_hz)?,
        opts.debounce_s,
    );
    if segs.is_empty() {
        return Err(Error::InsufficientData(
            "no complete swipe in the trace".into(),
        ));
    }
    let mut x = opts.apply(&fr)?.into_samples();
    let mut y = opts.apply(&fm)?.into_samples();
    remove_swipe_means(&mut x, &segs);
    remove_swipe_means(&mut y, &segs);
    let x = fr.with_samples(x)?;
    let y = fm.with_samples(y)?;
    let mask = retained_mask(&segs, x.len());
    let (y, lag_s) = align_by_xcorr_masked(&x, &y, &mask, opts.max_lag_s)?;
    let r2 = r_squared_masked(&x, &y, &mask)?;
    let per_swipe = segs
        .iter()
        .map(|s| {
            let xs = x.slice(s.keep_start, s.keep_end);
            let ys = y.slice(s.keep_start, s.keep_end);
            SwipeScore {
                start: s.start,
                end: s.end,
                direction: s.direction,
                r2: r_squared(&xs, &ys).ok(),
            }
        })
        .collect();
    Ok(TrackingReport {
        schema_version: REPORT_SCHEMA_VERSION,
        preset: opts.preset.clone(),
        fs: x.fs(),
        r2,
        lag_s,
        max_lag_s: opts.max_lag_s,
        retained_samples: mask.iter().filter(|m| **m).count(),
        per_swipe,
    })
}

/// Magnitude and phase of the measured force relative to the reference for
/// one (frequency, amplitude) condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub frequency: f64,
    pub amplitude: f64,
    pub swipes: usize,
    pub magnitude: Option<f64>,
    pub magnitude_std: Option<f64>,
    /// Circular mean, degrees.
    pub phase_deg: Option<f64>,
    /// Positive when the measurement lags, ms.
    pub delay_ms: Option<f64>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub schema_version: u32,
    pub rows: Vec<SensitivityRow>,
}

pub const SENSITIVITY_CSV_HEADER: [&str; 7] = [
    "frequency_Hz",
    "amplitude_N",
    "swipes",
    "magnitude",
    "magnitude_std",
    "phase_deg",
    "delay_ms",
];

impl SensitivityTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SENSITIVITY_CSV_HEADER)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
        for r in &self.rows {
            out.write_record([
                format!("{:?}", r.frequency),
                format!("{:?}", r.amplitude),
                r.swipes.to_string(),
                opt(r.magnitude),
                opt(r.magnitude_std),
                opt(r.phase_deg),
                opt(r.delay_ms),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Per-swipe (ratio, phase in degrees) pairs for one run.
pub fn swipe_responses(trace: &Trace, frequency: f64) -> Result<Vec<(f64, f64)>> {
    let fr = trace.reference()?;
    let fm = trace.measured()?;
    let segs = segment_swipes(&lowpass_zero_phase(&fm, SEGMENT_CUTOFF_HZ)?);
    let mut out = Vec::with_capacity(segs.len());
    for s in &segs {
        let r = lock_in(&fr.slice(s.keep_start, s.keep_end), frequency);
        let m = lock_in(&fm.slice(s.keep_start, s.keep_end), frequency);
        if let (Ok(r), Ok(m)) = (r, m) {
            if r.amplitude > 0.0 {
                out.push((m.amplitude / r.amplitude, wrap_deg(m.phase - r.phase)));
            }
        }
    }
    Ok(out)
}

/// Aggregates per-swipe `(ratio, phase_deg)` pairs into one table row.
pub fn sensitivity_row(frequency: f64, amplitude: f64, resp: &[(f64, f64)]) -> SensitivityRow {
    let n = resp.len();
    let warning = (n < 3).then(|| format!("only {n} usable swipes, need 3"));
    if n == 0 {
        return SensitivityRow {
            frequency,
            amplitude,
            swipes: 0,
            magnitude: None,
            magnitude_std: None,
            phase_deg: None,
            delay_ms: None,
            warning,
        };
    }
    let mean = resp.iter().map(|r| r.0).sum::<f64>() / n as f64;
    let var = resp.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / n as f64;
    let phasor: Complex64 = resp
        .iter()
        .map(|r| Complex64::from_polar(1.0, r.1.to_radians()))
        .sum();
    let phase = wrap_deg(phasor.arg().to_degrees());
    SensitivityRow {
        frequency,
        amplitude,
        swipes: n,
        magnitude: Some(mean),
        magnitude_std: Some(var.sqrt()),
        phase_deg: Some(phase),
        delay_ms: Some(-phase / (360.0 * frequency) * 1000.0),
        warning,
    }
}

/// Builds the sensitivity table from `(frequency, amplitude, trace)` runs.
/// Runs sharing a condition are pooled; rows keep first-appearance order.
pub fn empirical_sensitivity(runs: &[(f64, f64, &Trace)]) -> Result<SensitivityTable> {
    let mut keys: Vec<(f64, f64)> = Vec::new();
    let mut pooled: Vec<Vec<(f64, f64)>> = Vec::new();
    for &(f, a, trace) in runs {
        let resp = swipe_responses(trace, f)?;
        match keys.iter().position(|k| k.0 == f && k.1 == a) {
            Some(i) => pooled[i].extend(resp),
            None => {
                keys.push((f, a));
                pooled.push(resp);
            }
        }
    }
    let rows = keys
        .iter()
        .zip(&pooled)
        .map(|(&(f, a), r)| sensitivity_row(f, a, r))
        .collect();
    Ok(SensitivityTable {
        schema_version: REPORT_SCHEMA_VERSION,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSpectrum {
    pub freqs: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub segments: usize,
}

impl AmplitudeSpectrum {
    /// Value at the bin nearest to `f`.
    pub fn at(&self, f: f64) -> Option<f64> {
        let df = self.freqs.get(1).copied()? - self.freqs[0];
        let i = ((f - self.freqs[0]) / df).round();
        (i >= 0.0)
            .then(|| self.amplitude.get(i as usize).copied())
            .flatten()
    }
}

/// Averaged Hann-window amplitude spectrum on `segment_s` segments with
/// 50% overlap: `A = 2 |X| / sqrt(N sum w^2)` with the power averaged across
/// segments. Each segment has its mean removed. For white noise of standard
/// deviation `s` this reads `2 s / sqrt(N)`.
pub fn amplitude_spectrum(x: &Signal, segment_s: f64) -> Result<AmplitudeSpectrum> {
    let fs = x.fs();
    let n = (segment_s * fs).round() as usize;
    if n < 8 {
        return Err(Error::InvalidParameter(format!(
            "segment {segment_s} s is too short"
        )));
    }
    if x.len() < n {
        return Err(Error::InsufficientData(format!(
            "{} samples available, segment needs {n}",
            x.len()
        )));
    }
    let w: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect();
    let sw2: f64 = w.iter().map(|v| v * v).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let hop = n / 2;
    let bins = n / 2 + 1;
    let mut power = vec![0.0; bins];
    let mut segments = 0;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let s = x.samples();
    let mut start = 0;
    while start + n <= s.len() {
        let seg = &s[start..start + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            buf[i] = Complex64::new((seg[i] - mean) * w[i], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..bins {
            power[k] += buf[k].norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = 4.0 / (n as f64 * sw2 * segments as f64);
    Ok(AmplitudeSpectrum {
        freqs: (0..bins).map(|k| k as f64 * fs / n as f64).collect(),
        amplitude: power.iter().map(|p| (p * scale).sqrt()).collect(),
        segments,
    })
}
