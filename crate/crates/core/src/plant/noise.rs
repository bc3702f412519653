//! 1/f friction noise.
//!
//! A leaky integrator driven by white Gaussian noise has an amplitude
//! spectrum falling at 20 dB per decade above its corner. The drive level is
//! set so that the amplitude spectrum, as estimated with one-second segments
//! (`2 |X| / sqrt(N sum w^2)`), hits the configured anchors.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinkNoise {
    pole: f64,
    drive: f64,
    state: f64,
}

impl PinkNoise {
    /// Noise at rate `fs` whose amplitude spectrum passes (geometrically
    /// closest to) `a10` at 10 Hz and `a1k` at 1 kHz.
    pub fn new(a10: f64, a1k: f64, corner_hz: f64, fs: f64) -> Self {
        let pole = (-2.0 * PI * corner_hz / fs).exp();
        let drive_for = |a: f64, f: f64| {
            let d =
                Complex64::new(1.0, 0.0) - pole * Complex64::from_polar(1.0, -2.0 * PI * f / fs);
            a * d.norm() * fs.sqrt() / 2.0
        };
        let drive = (drive_for(a10, 10.0) * drive_for(a1k, 1000.0)).sqrt();
        Self {
            pole,
            drive,
            state: 0.0,
        }
    }

    /// Expected amplitude spectrum at `f` for a generator at rate `fs`.
    pub fn expected_amplitude(&self, f: f64, fs: f64) -> f64 {
        let d =
            Complex64::new(1.0, 0.0) - self.pole * Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        2.0 * self.drive / (fs.sqrt() * d.norm())
    }

    /// Starts from a draw of the stationary distribution.
    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let var = self.drive * self.drive / (1.0 - self.pole * self.pole);
        let z: f64 = rng.sample(StandardNormal);
        self.state = var.sqrt() * z;
    }

    pub fn value(&self) -> f64 {
        self.state
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.state = self.pole * self.state + self.drive * z;
        self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_hold_in_expectation() {
        let n = PinkNoise::new(1e-3, 1e-5, 0.05, 60_000.0);
        let a10 = n.expected_amplitude(10.0, 60_000.0);
        let a1k = n.expected_amplitude(1000.0, 60_000.0);
        assert!((a10 / 1e-3 - 1.0).abs() < 0.01, "{a10}");
        assert!((a1k / 1e-5 - 1.0).abs() < 0.01, "{a1k}");
    }
}
