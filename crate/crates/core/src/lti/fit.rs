//! Frequency-domain fitting of a discrete filter to a target response.
//!
//! The denominator is parametrized as a cascade of second-order sections
//! (plus one real pole for odd orders) whose coefficients are mapped into the
//! stability triangle, so every candidate the optimizer visits is stable and
//! its poles respect a configurable radius bound. The numerator is free.

use super::{log_grid, poly, DiscreteFilter, FrequencyResponse};
use crate::error::{Error, Result};
use crate::optim::{levenberg_marquardt, LmOptions};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Number of log-spaced grid points over the band.
    pub grid_points: usize,
    /// Independent optimizer starts.
    pub restarts: usize,
    pub seed: u64,
    /// Radius bound of the dominant pole (the real pole for odd orders, the
    /// first section otherwise).
    pub dominant_radius: f64,
    /// Radius bound of every other pole.
    pub max_radius: f64,
    /// Residual above which the fit is reported as a failure.
    pub max_residual: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grid_points: 200,
            restarts: 8,
            seed: 0x5eed,
            dominant_radius: 0.9999,
            max_radius: 0.9999,
            max_residual: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedFilter {
    pub filter: DiscreteFilter,
    /// Weighted sum over the grid of squared ln-magnitude error plus squared
    /// phase error in radians.
    pub residual: f64,
    pub rms_mag_db: f64,
    pub rms_phase_deg: f64,
    pub max_mag_db: f64,
    pub max_phase_deg: f64,
}

struct Layout {
    order: usize,
    sections: usize,
    has_real: bool,
    dominant: f64,
    other: f64,
}

impl Layout {
    fn new(order: usize, opts: &FitOptions) -> Self {
        Self {
            order,
            sections: order / 2,
            has_real: order % 2 == 1,
            dominant: opts.dominant_radius,
            other: opts.max_radius,
        }
    }

    fn n_den(&self) -> usize {
        2 * self.sections + usize::from(self.has_real)
    }

    fn n_params(&self) -> usize {
        self.order + 1 + self.n_den()
    }

    /// Denominator in z^-1 form from the unconstrained parameters.
    fn denominator(&self, q: &[f64]) -> Vec<f64> {
        let mut a = vec![1.0];
        let mut k = 0;
        let mut first = true;
        if self.has_real {
            let r = self.dominant * q[0].tanh();
            a = poly::mul(&a, &[1.0, -r]);
            k = 1;
            first = false;
        }
        for _ in 0..self.sections {
            let rho = if first { self.dominant } else { self.other };
            first = false;
            let s2 = q[k + 1].tanh();
            let s1 = (1.0 + s2) * q[k].tanh();
            a = poly::mul(&a, &[1.0, s1 * rho, s2 * rho * rho]);
            k += 2;
        }
        a
    }

    fn filter(&self, p: &[f64], fs: f64) -> Option<DiscreteFilter> {
        let b = p[..=self.order].to_vec();
        let a = self.denominator(&p[self.order + 1..]);
        DiscreteFilter::new(b, a, fs).ok()
    }
}

fn zinv_powers(freqs: &[f64], fs: f64, order: usize) -> Vec<Vec<Complex64>> {
    freqs
        .iter()
        .map(|&f| {
            let zi = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
            let mut v = Vec::with_capacity(order + 1);
            let mut acc = Complex64::new(1.0, 0.0);
            for _ in 0..=order {
                v.push(acc);
                acc *= zi;
            }
            v
        })
        .collect()
}

fn eval_with(powers: &[Complex64], c: &[f64]) -> Complex64 {
    c.iter().zip(powers).map(|(&x, &p)| p * x).sum()
}

/// Complex log of `h / t` with the imaginary part wrapped to (-pi, pi].
fn log_ratio(h: Complex64, t: Complex64) -> Complex64 {
    let q = h / t;
    Complex64::new(q.norm().ln(), q.arg())
}

/// Fits an order-`order` filter at `fs` to `target` over `band`, on a log grid.
pub fn discretize_fit(
    target: &FrequencyResponse,
    order: usize,
    fs: f64,
    band: (f64, f64),
) -> Result<FittedFilter> {
    discretize_fit_with(target, order, fs, band, &FitOptions::default())
}

/// As [`discretize_fit`] with explicit options.
pub fn discretize_fit_with(
    target: &FrequencyResponse,
    order: usize,
    fs: f64,
    band: (f64, f64),
    opts: &FitOptions,
) -> Result<FittedFilter> {
    let (lo, hi) = band;
    if order < 1 {
        return Err(Error::InvalidParameter("order must be >= 1".into()));
    }
    if !(lo > 0.0 && hi > lo && hi < fs / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "band ({lo}, {hi}) must lie inside (0, {})",
            fs / 2.0
        )));
    }
    let freqs = target.freqs();
    if freqs.is_empty()
        || freqs[0] > lo * (1.0 + 1e-12)
        || freqs[freqs.len() - 1] < hi * (1.0 - 1e-12)
    {
        return Err(Error::InvalidParameter(
            "target does not cover the fit band".into(),
        ));
    }
    let grid = log_grid(lo, hi, opts.grid_points.max(order + 2));
    let values: Vec<Complex64> = grid
        .iter()
        .map(|&f| {
            target
                .interpolate(f.clamp(freqs[0], freqs[freqs.len() - 1]))
                .ok_or_else(|| Error::InvalidParameter(format!("target undefined at {f} Hz")))
        })
        .collect::<Result<_>>()?;
    let weights = vec![1.0; grid.len()];
    discretize_fit_weighted(&grid, &values, &weights, order, fs, opts)
}

/// Fits to explicit target samples with per-point weights.
pub fn discretize_fit_weighted(
    grid: &[f64],
    target: &[Complex64],
    weights: &[f64],
    order: usize,
    fs: f64,
    opts: &FitOptions,
) -> Result<FittedFilter> {
    if grid.len() != target.len() || grid.len() != weights.len() {
        return Err(Error::InvalidParameter(
            "grid, target and weights differ in length".into(),
        ));
    }
    if order < 1 {
        return Err(Error::InvalidParameter("order must be >= 1".into()));
    }
    if target
        .iter()
        .any(|t| !(t.norm() > 0.0 && t.norm().is_finite()))
    {
        return Err(Error::InvalidParameter(
            "target must be finite and nonzero".into(),
        ));
    }
    let layout = Layout::new(order, opts);
    let powers = zinv_powers(grid, fs, order);
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.max(0.0).sqrt()).collect();

    let residuals = |p: &[f64]| -> Vec<f64> {
        let b = &p[..=order];
        let a = layout.denominator(&p[order + 1..]);
        let mut out = Vec::with_capacity(2 * grid.len());
        let mut im = Vec::with_capacity(grid.len());
        for ((pw, &t), &w) in powers.iter().zip(target).zip(&sqrt_w) {
            let h = eval_with(pw, b) / eval_with(pw, &a);
            let e = log_ratio(h, t);
            out.push(w * e.re);
            im.push(w * e.im);
        }
        out.extend(im);
        out
    };

    // Numerator by weighted equation-error least squares for a fixed
    // denominator: minimize |B - T A| / |T|.
    let init_numerator = |a: &[f64]| -> Option<Vec<f64>> {
        let m = grid.len();
        let mut mat = DMatrix::<f64>::zeros(2 * m, order + 1);
        let mut rhs = DVector::<f64>::zeros(2 * m);
        for (i, ((pw, &t), &w)) in powers.iter().zip(target).zip(&sqrt_w).enumerate() {
            let ta = t * eval_with(pw, a);
            let s = w / t.norm();
            for k in 0..=order {
                mat[(i, k)] = pw[k].re * s;
                mat[(m + i, k)] = pw[k].im * s;
            }
            rhs[i] = ta.re * s;
            rhs[m + i] = ta.im * s;
        }
        let sol = mat.svd(true, true).solve(&rhs, 1e-14).ok()?;
        Some(sol.iter().copied().collect())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..opts.restarts.max(1) {
        let q: Vec<f64> = (0..layout.n_den())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let a = layout.denominator(&q);
        let Some(b) = init_numerator(&a) else {
            continue;
        };
        let p0: Vec<f64> = b.into_iter().chain(q).collect();
        debug_assert_eq!(p0.len(), layout.n_params());
        let res = levenberg_marquardt(residuals, &p0, LmOptions::default());
        if res.cost.is_finite() && best.as_ref().is_none_or(|(c, _)| res.cost < *c) {
            best = Some((res.cost, res.params));
        }
    }
    let Some((cost, params)) = best else {
        return Err(Error::FitFailure {
            residual: f64::INFINITY,
            reason: "no restart produced a finite residual".into(),
        });
    };
    if let Some(bound) = opts.max_residual.filter(|b| cost > *b) {
        return Err(Error::FitFailure {
            residual: cost,
            reason: format!("residual above acceptance bound {bound}"),
        });
    }
    let filter = layout
        .filter(&params, fs)
        .ok_or_else(|| Error::FitFailure {
            residual: cost,
            reason: "optimum is not a valid filter".into(),
        })?;
    let (mut sm, mut sp, mut mm, mut mp, mut wsum) = (0.0, 0.0, 0.0f64, 0.0f64, 0.0);
    for ((&f, &t), &w) in grid.iter().zip(target).zip(weights) {
        let e = log_ratio(filter.at_hz(f), t);
        let db = 20.0 * e.re / std::f64::consts::LN_10;
        let deg = e.im.to_degrees();
        sm += w * db * db;
        sp += w * deg * deg;
        wsum += w;
        if w > 0.0 {
            mm = mm.max(db.abs());
            mp = mp.max(deg.abs());
        }
    }
    let wsum = wsum.max(f64::MIN_POSITIVE);
    Ok(FittedFilter {
        filter,
        residual: cost,
        rms_mag_db: (sm / wsum).sqrt(),
        rms_phase_deg: (sp / wsum).sqrt(),
        max_mag_db: mm,
        max_phase_deg: mp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::is_stable;

    #[test]
    fn unity_target_order_one() {
        let grid = log_grid(10.0, 1000.0, 50);
        let target =
            FrequencyResponse::new(grid.clone(), vec![Complex64::new(1.0, 0.0); 50]).unwrap();
        let fit = discretize_fit(&target, 1, 10_000.0, (10.0, 1000.0)).unwrap();
        assert!(fit.residual < 1e-20, "{}", fit.residual);
        for &f in &grid {
            assert!((fit.filter.at_hz(f) - 1.0).norm() < 1e-9);
        }
    }

    #[test]
    fn rejects_band_beyond_nyquist() {
        let grid = log_grid(10.0, 6000.0, 50);
        let target = FrequencyResponse::new(grid, vec![Complex64::new(1.0, 0.0); 50]).unwrap();
        assert!(discretize_fit(&target, 2, 10_000.0, (10.0, 6000.0)).is_err());
    }

    #[test]
    fn fitted_filters_are_stable() {
        // an unstable target still yields a stable fit
        let unstable = DiscreteFilter::new(vec![1.0], vec![1.0, -1.2], 10_000.0).unwrap();
        let grid = log_grid(10.0, 1000.0, 200);
        let target = unstable.freq_response(&grid).unwrap();
        let fit = discretize_fit(&target, 2, 10_000.0, (10.0, 1000.0)).unwrap();
        assert!(is_stable(&fit.filter));
    }
}
