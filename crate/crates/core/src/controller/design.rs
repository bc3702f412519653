//! Emulation-based discrete controller design.
//!
//! The ideal continuous controller for a unity target is sampled on a log
//! grid over the design band and a low-order `C(z)` is fitted to it. The
//! measurement path seen by the controller includes the hold and sampling
//! of the loop, so the ideal response is computed against `L G H` where `H`
//! is the zero-order-hold response times any pure computational latency.
//! Stability and bandwidth are then predicted on the exact sampled loop
//! `C(z) P X(z)` with `X = ZOH{L G}`.

use super::synthesis::ideal_controller_at;
use crate::error::{Error, Result};
use crate::lti::{
    discretize_fit_weighted, log_grid, poly, zoh_discretize, DiscreteFilter, FitOptions, RationalTF,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// What the discrete controller should achieve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignTarget {
    /// Fit band in Hz.
    pub band: (f64, f64),
    /// Target log-magnitude of `T` (nepers) across the band.
    pub epsilon: f64,
    /// Target phase of `T` (degrees) across the band.
    pub gamma: f64,
    pub order: usize,
    pub fs: f64,
    /// Controller gain is divided by this after fitting.
    pub backoff: f64,
    /// Actuation gain the ideal controller is computed for (N/mA).
    pub p_design: f64,
    /// Declared actuation-gain range the design must be stable over (N/mA).
    pub p_range: (f64, f64),
    /// Points of the log-spaced stability grid over `p_range`.
    pub stability_grid: usize,
    /// Whole samples between reading the inputs and applying `u`, on top of
    /// the zero-order hold.
    pub latency_samples: usize,
    /// Pole radius bound for all controller poles except the integrating one.
    pub max_pole_radius: f64,
    /// Pole radius bound for the integrating pole.
    pub integrator_radius: f64,
    pub fit: FitOptions,
}

impl Default for DesignTarget {
    fn default() -> Self {
        Self {
            band: (10.0, 1000.0),
            epsilon: 0.0,
            gamma: 0.0,
            order: 3,
            fs: 10_000.0,
            backoff: 2.5,
            p_design: 0.06,
            p_range: (0.01, 0.14),
            stability_grid: 20,
            latency_samples: 0,
            max_pole_radius: 0.9,
            integrator_radius: 0.9999,
            fit: FitOptions {
                restarts: 12,
                ..FitOptions::default()
            },
        }
    }
}

impl DesignTarget {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band;
        if !(lo > 0.0 && hi > lo && hi < self.fs / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "band ({lo}, {hi}) must lie inside (0, {})",
                self.fs / 2.0
            )));
        }
        if self.order < 1 {
            return Err(Error::InvalidParameter("order must be >= 1".into()));
        }
        if !(self.backoff >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "backoff {} must be >= 1",
                self.backoff
            )));
        }
        let (pmin, pmax) = self.p_range;
        if !(self.p_design > 0.0 && pmin > 0.0 && pmin <= pmax) {
            return Err(Error::InvalidParameter(
                "actuation gains must be positive and ordered".into(),
            ));
        }
        if self.latency_samples > 4 {
            return Err(Error::InvalidParameter(
                "latency is limited to 0-4 samples".into(),
            ));
        }
        if !(self.max_pole_radius > 0.0 && self.max_pole_radius < 1.0)
            || !(self.integrator_radius > 0.0 && self.integrator_radius < 1.0)
        {
            return Err(Error::InvalidParameter(
                "pole radius bounds must lie in (0, 1)".into(),
            ));
        }
        if !self.epsilon.is_finite() || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(
                "epsilon and gamma must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Target value of `T` inside the band.
    pub fn t_target(&self) -> Complex64 {
        Complex64::from_polar(self.epsilon.exp(), self.gamma.to_radians())
    }
}

/// Zero-order hold plus `latency` whole samples at `fs`, evaluated at `f`.
pub fn sample_hold_response(f: f64, fs: f64, latency: usize) -> Complex64 {
    let x = PI * f / fs;
    let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
    Complex64::from_polar(sinc, -x - 2.0 * PI * f * latency as f64 / fs)
}

/// Sampled model of the loop as the controller sees it: `u` held for one
/// period, through `P`, `G` and `L`, sampled, and delayed by the latency.
#[derive(Debug, Clone)]
pub struct SampledLoop {
    /// `ZOH{L G}` at the controller rate.
    pub path: DiscreteFilter,
    pub latency: usize,
}

impl SampledLoop {
    pub fn new(l: &RationalTF, g: &RationalTF, fs: f64, latency: usize) -> Result<Self> {
        let path = zoh_discretize(&l.mul(g), fs)?.to_filter()?;
        Ok(Self { path, latency })
    }

    /// Closed-loop characteristic polynomial in descending powers of `z`.
    pub fn characteristic(&self, c: &DiscreteFilter, p: f64) -> Vec<f64> {
        // A_c A_x + P B_c B_x z^-lat = 0, as polynomials in z^-1
        let a = poly::mul(c.a(), self.path.a());
        let mut b: Vec<f64> = vec![0.0; self.latency];
        b.extend(poly::mul(c.b(), self.path.b()).iter().map(|x| x * p));
        let n = a.len().max(b.len());
        (0..n)
            .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
            .collect()
    }

    pub fn is_stable(&self, c: &DiscreteFilter, p: f64) -> bool {
        poly::schur_stable(&self.characteristic(c, p))
    }

    pub fn max_pole_radius(&self, c: &DiscreteFilter, p: f64) -> f64 {
        poly::roots(&self.characteristic(c, p))
            .iter()
            .fold(0.0, |m, r| m.max(r.norm()))
    }

    /// `f_f / f_r` at the sample instants for actuation gain `p`.
    pub fn t_at(&self, c: &DiscreteFilter, p: f64, f: f64) -> Complex64 {
        let fs = c.fs();
        let x = self.path.at_hz(f)
            * Complex64::from_polar(1.0, -2.0 * PI * f * self.latency as f64 / fs);
        let cp = c.at_hz(f) * p;
        cp / (1.0 + cp * x)
    }

    /// Lowest frequency where `|T|` first drops below -3 dB, or `None` if it
    /// stays above up to Nyquist.
    pub fn bandwidth(&self, c: &DiscreteFilter, p: f64) -> Option<f64> {
        let fs = c.fs();
        let level = 10f64.powf(-3.0 / 20.0);
        let grid = log_grid(0.1, 0.4999 * fs, 4000);
        let below = |f: f64| self.t_at(c, p, f).norm() < level;
        let k = grid.iter().position(|&f| below(f))?;
        if k == 0 {
            return Some(grid[0]);
        }
        let (mut lo, mut hi) = (grid[k - 1], grid[k]);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if below(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub p: f64,
    pub stable: bool,
    pub max_pole_radius: f64,
    pub bandwidth_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPrediction {
    pub label: String,
    pub p: f64,
    pub bandwidth_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub fit_residual: f64,
    pub fit_rms_mag_db: f64,
    pub fit_rms_phase_deg: f64,
    pub fit_max_mag_db: f64,
    pub fit_max_phase_deg: f64,
    pub backoff: f64,
    /// `p_design * backoff`: the actuation gain the backed-off controller
    /// would be exactly tuned for.
    pub equivalent_p: f64,
    pub controller_poles: Vec<(f64, f64)>,
    pub bandwidths: Vec<BandwidthPrediction>,
    pub stability: Vec<StabilityPoint>,
    pub all_stable: bool,
    /// RMS over the band of `ln|T| - epsilon` at the design gain.
    pub realized_epsilon_rms: f64,
    /// RMS over the band of `arg T - gamma` (degrees) at the design gain.
    pub realized_gamma_rms_deg: f64,
    pub latency_samples: usize,
}

/// Designs the discrete controller for `target` and plant components `p`,
/// `l`, `g`. `p` must be a constant gain; its value is taken as the nominal
/// actuation gain used in the report.
pub fn design_discrete(
    target: &DesignTarget,
    p: &RationalTF,
    l: &RationalTF,
    g: &RationalTF,
) -> Result<(DiscreteFilter, DesignReport)> {
    target.validate()?;
    let p_nominal = p.dc_gain();
    if poly::degree(p.num()) != 0 || poly::degree(p.den()) != 0 || !(p_nominal > 0.0) {
        return Err(Error::InvalidParameter(
            "actuation P must be a positive constant gain".into(),
        ));
    }
    let fs = target.fs;
    let lg = l.mul(g);
    let grid = log_grid(
        target.band.0,
        target.band.1,
        target.fit.grid_points.max(target.order + 2),
    );
    let t = target.t_target();
    let pd = Complex64::new(target.p_design, 0.0);
    let ideal: Vec<Complex64> = grid
        .iter()
        .map(|&f| {
            let h = sample_hold_response(f, fs, target.latency_samples);
            Ok(ideal_controller_at(
                t,
                pd,
                lg.at_hz(f)?,
                Complex64::new(1.0, 0.0),
                h,
            ))
        })
        .collect::<Result<_>>()?;
    if ideal.iter().any(|c| !c.is_finite()) {
        return Err(Error::SingularDesign(
            "ideal controller is unbounded inside the band".into(),
        ));
    }
    let opts = FitOptions {
        dominant_radius: target.integrator_radius,
        max_radius: target.max_pole_radius,
        ..target.fit.clone()
    };
    let weights = vec![1.0; grid.len()];
    let fit = discretize_fit_weighted(&grid, &ideal, &weights, target.order, fs, &opts)?;
    let c = fit.filter.scale_gain(1.0 / target.backoff);

    let sampled = SampledLoop::new(l, g, fs, target.latency_samples)?;
    let (pmin, pmax) = target.p_range;
    let stability: Vec<StabilityPoint> = log_grid(pmin, pmax, target.stability_grid.max(2))
        .into_iter()
        .map(|pv| StabilityPoint {
            p: pv,
            stable: sampled.is_stable(&c, pv),
            max_pole_radius: sampled.max_pole_radius(&c, pv),
            bandwidth_hz: sampled.bandwidth(&c, pv),
        })
        .collect();
    let all_stable = stability.iter().all(|s| s.stable) && sampled.is_stable(&c, p_nominal);
    let bandwidths = [("P_min", pmin), ("P_nominal", p_nominal), ("P_max", pmax)]
        .iter()
        .map(|&(label, pv)| BandwidthPrediction {
            label: label.into(),
            p: pv,
            bandwidth_hz: sampled.bandwidth(&c, pv),
        })
        .collect();
    let (mut se, mut sg) = (0.0, 0.0);
    for &f in &grid {
        let tv = sampled.t_at(&c, target.p_design, f);
        let de = tv.norm().ln() - target.epsilon;
        let mut dg = tv.arg().to_degrees() - target.gamma;
        dg = (dg + 180.0).rem_euclid(360.0) - 180.0;
        se += de * de;
        sg += dg * dg;
    }
    let report = DesignReport {
        fit_residual: fit.residual,
        fit_rms_mag_db: fit.rms_mag_db,
        fit_rms_phase_deg: fit.rms_phase_deg,
        fit_max_mag_db: fit.max_mag_db,
        fit_max_phase_deg: fit.max_phase_deg,
        backoff: target.backoff,
        equivalent_p: target.p_design * target.backoff,
        controller_poles: c.poles().iter().map(|z| (z.re, z.im)).collect(),
        bandwidths,
        stability,
        all_stable,
        realized_epsilon_rms: (se / grid.len() as f64).sqrt(),
        realized_gamma_rms_deg: (sg / grid.len() as f64).sqrt(),
        latency_samples: target.latency_samples,
    };
    if !report.all_stable {
        let bad: Vec<String> = report
            .stability
            .iter()
            .filter(|s| !s.stable)
            .map(|s| format!("P={:.4} (max |pole| {:.4})", s.p, s.max_pole_radius))
            .collect();
        return Err(Error::DesignRejected(format!(
            "closed loop unstable at {}",
            bad.join(", ")
        )));
    }
    Ok((c, report))
}
