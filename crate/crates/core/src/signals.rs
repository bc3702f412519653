//! Reference force signals.

use crate::error::{Error, Result};
use crate::lti::{log_grid, Signal, Unit};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Read;
use std::path::PathBuf;

/// Amplitudes of the sensitivity sweep, N.
pub const SWEEP_AMPLITUDES: [f64; 4] = [0.01, 0.02, 0.03, 0.04];

/// 20 log-spaced frequencies from 20 Hz to 1 kHz.
pub fn sweep_frequencies() -> Vec<f64> {
    log_grid(20.0, 1000.0, 20)
}

/// Every (frequency, amplitude) pair of the sweep, frequency-major.
pub fn sweep_grid() -> Vec<(f64, f64)> {
    sweep_frequencies()
        .into_iter()
        .flat_map(|f| SWEEP_AMPLITUDES.iter().map(move |&a| (f, a)))
        .collect()
}

fn sample_count(dur: f64, fs: f64) -> Result<usize> {
    if !(dur >= 0.0 && dur.is_finite() && fs > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad duration {dur} s or rate {fs} Hz"
        )));
    }
    Ok((dur * fs).round() as usize)
}

fn check_tone(f: f64, fs: f64) -> Result<()> {
    if !(f > 0.0 && f < fs / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "frequency {f} Hz must lie in (0, {})",
            fs / 2.0
        )));
    }
    Ok(())
}

/// `+amp` for the first half of each period, `-amp` for the second.
pub fn gen_square(f: f64, amp: f64, dur: f64, fs: f64) -> Result<Signal> {
    check_tone(f, fs)?;
    let n = sample_count(dur, fs)?;
    let x = (0..n)
        .map(|i| {
            let half = (2.0 * f * i as f64 / fs + 1e-9).floor() as i64;
            if half % 2 == 0 {
                amp
            } else {
                -amp
            }
        })
        .collect();
    Signal::new(x, fs, Unit::Newton)
}

pub fn gen_sine(f: f64, amp: f64, dur: f64, fs: f64) -> Result<Signal> {
    check_tone(f, fs)?;
    let n = sample_count(dur, fs)?;
    let w = 2.0 * PI * f / fs;
    Signal::new(
        (0..n).map(|i| amp * (w * i as f64).sin()).collect(),
        fs,
        Unit::Newton,
    )
}

/// Material for [`stitch_feather`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureSpec {
    pub segments: Vec<Signal>,
    pub overlap_s: f64,
    pub total_s: f64,
}

impl TextureSpec {
    pub fn validate(&self) -> Result<()> {
        let first = self
            .segments
            .first()
            .ok_or_else(|| Error::Spec("texture has no segments".into()))?;
        let fs = first.fs();
        if self
            .segments
            .iter()
            .any(|s| (s.fs() - fs).abs() > 1e-9 * fs)
        {
            return Err(Error::Spec("segments must share one sample rate".into()));
        }
        if !(self.overlap_s >= 0.0 && self.total_s > 0.0) {
            return Err(Error::Spec("overlap must be >= 0 and total > 0".into()));
        }
        let ov = (self.overlap_s * fs).round() as usize;
        if self.segments.iter().any(|s| s.len() <= ov) {
            return Err(Error::Spec(
                "every segment must be longer than the overlap".into(),
            ));
        }
        let available = ov + self.segments.iter().map(|s| s.len() - ov).sum::<usize>();
        let needed = (self.total_s * fs).round() as usize;
        if available < needed {
            return Err(Error::Spec(format!(
                "segments provide {available} samples, {needed} requested"
            )));
        }
        Ok(())
    }
}

/// Concatenates the segments in order with a linear cross-fade of
/// `overlap_s` at each joint and cuts the result to `total_s`.
pub fn stitch_feather(spec: &TextureSpec) -> Result<Signal> {
    spec.validate()?;
    let first = &spec.segments[0];
    let fs = first.fs();
    let ov = (spec.overlap_s * fs).round() as usize;
    let needed = (spec.total_s * fs).round() as usize;
    let mut out: Vec<f64> = first.samples().to_vec();
    for seg in &spec.segments[1..] {
        if out.len() >= needed {
            break;
        }
        let s = seg.samples();
        let base = out.len() - ov;
        for j in 0..ov {
            let w = (j + 1) as f64 / (ov + 1) as f64;
            out[base + j] = (1.0 - w) * out[base + j] + w * s[j];
        }
        out.extend_from_slice(&s[ov..]);
    }
    out.truncate(needed);
    Signal::new(out, fs, first.unit())
}

/// Spectral envelope of a synthetic texture: a low-pass roll-off with an
/// optional resonant bump, limited to 10 Hz to 1 kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureProfile {
    pub label: &'static str,
    /// RMS of the stitched force, N.
    pub rms: f64,
    pub corner_hz: f64,
    /// Roll-off exponent above the corner.
    pub slope: f64,
    pub peak_hz: Option<f64>,
    pub peak_gain: f64,
}

pub const TEXTURE_BAND: (f64, f64) = (10.0, 1000.0);

/// Synthetic stand-ins ordered from coarse to fine. They are not
/// measurements of real fabrics.
pub const TEXTURES: [TextureProfile; 6] = [
    TextureProfile {
        label: "EV",
        rms: 0.008,
        corner_hz: 60.0,
        slope: 1.0,
        peak_hz: None,
        peak_gain: 0.0,
    },
    TextureProfile {
        label: "MS",
        rms: 0.004,
        corner_hz: 120.0,
        slope: 1.0,
        peak_hz: None,
        peak_gain: 0.0,
    },
    TextureProfile {
        label: "SW",
        rms: 0.010,
        corner_hz: 50.0,
        slope: 1.5,
        peak_hz: Some(120.0),
        peak_gain: 2.0,
    },
    TextureProfile {
        label: "DM",
        rms: 0.012,
        corner_hz: 40.0,
        slope: 1.0,
        peak_hz: Some(60.0),
        peak_gain: 3.0,
    },
    TextureProfile {
        label: "HT",
        rms: 0.020,
        corner_hz: 20.0,
        slope: 1.5,
        peak_hz: None,
        peak_gain: 0.0,
    },
    TextureProfile {
        label: "FL",
        rms: 0.006,
        corner_hz: 80.0,
        slope: 1.0,
        peak_hz: None,
        peak_gain: 0.0,
    },
];

pub fn texture_by_label(label: &str) -> Result<&'static TextureProfile> {
    TEXTURES
        .iter()
        .find(|t| t.label.eq_ignore_ascii_case(label))
        .ok_or_else(|| Error::Config(format!("unknown texture '{label}'")))
}

impl TextureProfile {
    pub fn envelope(&self, f: f64) -> f64 {
        if f < TEXTURE_BAND.0 || f > TEXTURE_BAND.1 {
            return 0.0;
        }
        let base = (1.0 + (f / self.corner_hz).powi(2)).powf(-self.slope / 2.0);
        let bump = self.peak_hz.map_or(0.0, |p| {
            let x = (f / p).ln() / 0.15;
            self.peak_gain * (-0.5 * x * x).exp()
        });
        base * (1.0 + bump)
    }

    /// One segment of band-limited Gaussian noise with this envelope, unit
    /// RMS.
    pub fn segment(&self, len: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut spec = vec![Complex64::new(0.0, 0.0); len];
        for k in 1..len.div_ceil(2) {
            let e = self.envelope(k as f64 * fs / len as f64);
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            spec[k] = Complex64::new(re, im) * e;
            spec[len - k] = spec[k].conj();
        }
        FftPlanner::<f64>::new()
            .plan_fft_inverse(len)
            .process(&mut spec);
        let x: Vec<f64> = spec.iter().map(|c| c.re).collect();
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
        if rms > 0.0 {
            x.iter().map(|v| v / rms).collect()
        } else {
            x
        }
    }

    /// Stitched reference of `total_s` seconds built from 1 s segments with
    /// 50 ms feathering, scaled to the profile RMS.
    pub fn generate(&self, total_s: f64, fs: f64, seed: u64) -> Result<Signal> {
        let seg_len = fs.round() as usize;
        let ov = 0.05;
        let count = ((total_s - ov) / (1.0 - ov)).ceil().max(1.0) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let segments = (0..count)
            .map(|_| Signal::new(self.segment(seg_len, fs, &mut rng), fs, Unit::Newton))
            .collect::<Result<Vec<_>>>()?;
        let raw = stitch_feather(&TextureSpec {
            segments,
            overlap_s: ov,
            total_s,
        })?;
        let x = raw.samples();
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
        let k = if rms > 0.0 { self.rms / rms } else { 0.0 };
        raw.with_samples(x.iter().map(|v| v * k).collect())
    }
}

/// Reads a force recording. With two or more columns the first is time in
/// seconds and the second force in N; with one column `fs` must be given.
/// A non-numeric first row is taken as a header.
pub fn read_force_csv<R: Read>(r: R, fs: Option<f64>) -> Result<Signal> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut t = Vec::new();
    let mut x = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let nums: Option<Vec<f64>> = rec.iter().map(|c| c.trim().parse::<f64>().ok()).collect();
        let Some(nums) = nums else {
            if i == 0 {
                continue;
            }
            return Err(Error::Format(format!("row {}: non-numeric field", i + 1)));
        };
        match nums.as_slice() {
            [v] => x.push(*v),
            [tt, v, ..] => {
                t.push(*tt);
                x.push(*v);
            }
            [] => continue,
        }
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(
            "recording has fewer than two samples".into(),
        ));
    }
    let rate = match fs {
        Some(fs) => fs,
        None if t.len() == x.len() => {
            let span = t[t.len() - 1] - t[0];
            if !(span > 0.0) {
                return Err(Error::Format("time column must increase".into()));
            }
            (x.len() - 1) as f64 / span
        }
        None => {
            return Err(Error::Format(
                "single-column recording needs a sample rate".into(),
            ))
        }
    };
    Signal::new(x, rate, Unit::Newton)
}

/// Resamples `x` to `fs` by linear interpolation.
pub fn resample_linear(x: &Signal, fs: f64) -> Result<Signal> {
    if (x.fs() - fs).abs() <= 1e-9 * fs {
        return Ok(x.clone());
    }
    let src = x.samples();
    let n = (x.duration() * fs).floor() as usize;
    let y = (0..n)
        .map(|i| {
            let pos = i as f64 * x.fs() / fs;
            let j = pos.floor() as usize;
            let frac = pos - j as f64;
            let a = src[j.min(src.len() - 1)];
            let b = src[(j + 1).min(src.len() - 1)];
            a + frac * (b - a)
        })
        .collect();
    Signal::new(y, fs, x.unit())
}

/// Reference force selection for an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    Zero,
    Square {
        frequency: f64,
        amplitude: f64,
    },
    Sine {
        frequency: f64,
        amplitude: f64,
    },
    /// One of the synthetic textures, optionally rescaled to `rms` N.
    Texture {
        label: String,
        #[serde(default)]
        rms: Option<f64>,
    },
    /// A user recording, feather-looped to the run length.
    Csv {
        path: PathBuf,
        #[serde(default)]
        fs: Option<f64>,
    },
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec::Square {
            frequency: 20.0,
            amplitude: 0.025,
        }
    }
}

impl ReferenceSpec {
    /// Samples the reference for `duration` s at `fs`.
    pub fn generate(&self, duration: f64, fs: f64, seed: u64) -> Result<Signal> {
        match self {
            ReferenceSpec::Zero => {
                Signal::new(vec![0.0; sample_count(duration, fs)?], fs, Unit::Newton)
            }
            ReferenceSpec::Square {
                frequency,
                amplitude,
            } => gen_square(*frequency, *amplitude, duration, fs),
            ReferenceSpec::Sine {
                frequency,
                amplitude,
            } => gen_sine(*frequency, *amplitude, duration, fs),
            ReferenceSpec::Texture { label, rms } => {
                let mut p = *texture_by_label(label)?;
                if let Some(r) = rms {
                    p.rms = *r;
                }
                p.generate(duration, fs, seed)
            }
            ReferenceSpec::Csv { path, fs: rec_fs } => {
                let file = std::fs::File::open(path)?;
                let rec = resample_linear(&read_force_csv(file, *rec_fs)?, fs)?;
                let ov = 0.05f64.min(rec.duration() / 4.0);
                let reps = ((duration - ov) / (rec.duration() - ov)).ceil().max(1.0) as usize;
                stitch_feather(&TextureSpec {
                    segments: vec![rec; reps],
                    overlap_s: ov,
                    total_s: duration,
                })
            }
        }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        match self {
            ReferenceSpec::Square {
                frequency,
                amplitude,
            }
            | ReferenceSpec::Sine {
                frequency,
                amplitude,
            } => {
                check_tone(*frequency, fs)?;
                if !amplitude.is_finite() {
                    return Err(Error::Config("amplitude must be finite".into()));
                }
                Ok(())
            }
            ReferenceSpec::Texture { label, rms } => {
                texture_by_label(label)?;
                if rms.is_some_and(|r| !(r >= 0.0)) {
                    return Err(Error::Config("texture rms must be >= 0".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Post-processing preset matching the reference type.
    pub fn tracking_preset(&self) -> &'static str {
        match self {
            ReferenceSpec::Square { .. } => "square_wave",
            _ => "texture",
        }
    }
}
