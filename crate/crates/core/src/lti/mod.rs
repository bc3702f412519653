//! Linear time-invariant building blocks.
//!
//! Continuous-time rational transfer functions, z-domain filters, sampled
//! frequency responses and uniformly sampled signals. Everything here is an
//! immutable value; simulation state lives only inside a single call.

mod discrete;
mod fit;
pub mod poly;
mod statespace;
mod tf;

pub use discrete::{is_stable, simulate_discrete, DiscreteFilter, FilterRunner, DIVERGENCE_GUARD};
pub use fit::{
    discretize_fit, discretize_fit_weighted, discretize_fit_with, FitOptions, FittedFilter,
};
pub use statespace::{zoh_discretize, DiscreteStateSpace, StateSpace};
pub use tf::{freq_response, make_second_order, RationalTF};

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Physical unit carried by a [`Signal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "N")]
    Newton,
    #[serde(rename = "mA")]
    MilliAmp,
    #[serde(rename = "V")]
    Volt,
    #[serde(rename = "m")]
    Meter,
    #[serde(rename = "1")]
    Dimensionless,
}

/// Uniformly sampled time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalRepr")]
pub struct Signal {
    samples: Vec<f64>,
    fs: f64,
    unit: Unit,
}

#[derive(Deserialize)]
struct SignalRepr {
    samples: Vec<f64>,
    fs: f64,
    unit: Unit,
}

impl TryFrom<SignalRepr> for Signal {
    type Error = Error;
    fn try_from(r: SignalRepr) -> Result<Self> {
        Signal::new(r.samples, r.fs, r.unit)
    }
}

impl Signal {
    pub fn new(samples: Vec<f64>, fs: f64, unit: Unit) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be > 0, got {fs}"
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self { samples, fs, unit })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Same rate and unit, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Signal::new(samples, self.fs, self.unit)
    }

    /// Sub-range `[start, end)` in samples.
    pub fn slice(&self, start: usize, end: usize) -> Signal {
        Signal {
            samples: self.samples[start..end].to_vec(),
            fs: self.fs,
            unit: self.unit,
        }
    }
}

/// Sampled complex frequency response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrequencyResponseRepr")]
pub struct FrequencyResponse {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
}

#[derive(Deserialize)]
struct FrequencyResponseRepr {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
}

impl TryFrom<FrequencyResponseRepr> for FrequencyResponse {
    type Error = Error;
    fn try_from(r: FrequencyResponseRepr) -> Result<Self> {
        FrequencyResponse::new(r.freqs, r.values)
    }
}

impl FrequencyResponse {
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} frequencies but {} values",
                freqs.len(),
                values.len()
            )));
        }
        check_freq_grid(&freqs)?;
        Ok(Self { freqs, values })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.freqs.iter().copied().zip(self.values.iter().copied())
    }

    pub fn magnitude_db(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| 20.0 * v.norm().log10())
            .collect()
    }

    pub fn phase_deg(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.arg().to_degrees()).collect()
    }

    /// Restriction to frequencies inside `[lo, hi]`.
    pub fn band(&self, lo: f64, hi: f64) -> FrequencyResponse {
        let (freqs, values) = self.iter().filter(|(f, _)| *f >= lo && *f <= hi).unzip();
        FrequencyResponse { freqs, values }
    }

    /// Pointwise product with another response on the same grid.
    pub fn mul(&self, other: &FrequencyResponse) -> Result<FrequencyResponse> {
        if self.freqs != other.freqs {
            return Err(Error::InvalidParameter("frequency grids differ".into()));
        }
        Ok(FrequencyResponse {
            freqs: self.freqs.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    /// Log-linear interpolation of the complex value (magnitude in log,
    /// unwrapped phase linear) at `f`; `None` outside the covered range.
    pub fn interpolate(&self, f: f64) -> Option<Complex64> {
        let n = self.freqs.len();
        if n == 0 || f < self.freqs[0] || f > self.freqs[n - 1] {
            return None;
        }
        let i = self.freqs.partition_point(|&x| x < f);
        if i < n && self.freqs[i] == f {
            return Some(self.values[i]);
        }
        let (f0, f1) = (self.freqs[i - 1], self.freqs[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        let w = (f.ln() - f0.ln()) / (f1.ln() - f0.ln());
        let lm = (1.0 - w) * v0.norm().ln() + w * v1.norm().ln();
        let mut dp = v1.arg() - v0.arg();
        if dp > PI {
            dp -= 2.0 * PI;
        } else if dp < -PI {
            dp += 2.0 * PI;
        }
        Some(Complex64::from_polar(lm.exp(), v0.arg() + w * dp))
    }
}

pub(crate) fn check_freq_grid(freqs: &[f64]) -> Result<()> {
    if let Some(&f) = freqs.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "frequency {f} must be finite and > 0"
        )));
    }
    if freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "frequencies must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `n` logarithmically spaced frequencies from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}
