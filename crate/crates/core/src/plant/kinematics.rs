//! Finger motion and normal load as explicit functions of time.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kinematics {
    /// `x = -A cos(2 pi f t)`: starts at rest, reverses every half period.
    Sinusoidal { amplitude_m: f64, swipe_freq: f64 },
    /// Steady motion in one direction from rest at `t = 0`.
    Constant { velocity: f64 },
    /// No motion; the contact never leaves the stuck state.
    Frozen,
}

impl Kinematics {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kinematics::Sinusoidal {
                amplitude_m,
                swipe_freq,
            } if !(amplitude_m > 0.0 && swipe_freq > 0.0) => Err(Error::Config(
                "sinusoidal swipe needs positive amplitude and frequency".into(),
            )),
            Kinematics::Constant { velocity } if velocity == 0.0 || !velocity.is_finite() => {
                Err(Error::Config("constant velocity must be nonzero".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn half_period(&self) -> Option<f64> {
        match *self {
            Kinematics::Sinusoidal { swipe_freq, .. } => Some(0.5 / swipe_freq),
            _ => None,
        }
    }

    pub fn position(&self, t: f64) -> f64 {
        match *self {
            Kinematics::Sinusoidal {
                amplitude_m,
                swipe_freq,
            } => -amplitude_m * (2.0 * PI * swipe_freq * t).cos(),
            Kinematics::Constant { velocity } => velocity * t,
            Kinematics::Frozen => 0.0,
        }
    }

    pub fn velocity(&self, t: f64) -> f64 {
        match *self {
            Kinematics::Sinusoidal {
                amplitude_m,
                swipe_freq,
            } => {
                let w = 2.0 * PI * swipe_freq;
                amplitude_m * w * (w * t).sin()
            }
            Kinematics::Constant { velocity } => velocity,
            Kinematics::Frozen => 0.0,
        }
    }

    /// Most recent velocity reversal at or before `t`, with the direction
    /// of motion after it. `None` when the finger never moves.
    pub fn last_reversal(&self, t: f64) -> Option<(f64, f64)> {
        match *self {
            Kinematics::Sinusoidal { swipe_freq, .. } => {
                let half = 0.5 / swipe_freq;
                // tiny slack so that t = n * half lands in swipe n despite rounding
                let n = ((t + 1e-12 * half.max(1.0)) / half).floor().max(0.0);
                let dir = if (n as i64) % 2 == 0 { 1.0 } else { -1.0 };
                Some((n * half, dir))
            }
            Kinematics::Constant { velocity } => Some((0.0, velocity.signum())),
            Kinematics::Frozen => None,
        }
    }
}

/// Normal load `W(t)`, N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadProfile {
    Constant {
        value: f64,
    },
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        freq: f64,
    },
}

impl LoadProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LoadProfile::Constant { value } => value >= 0.0 && value.is_finite(),
            LoadProfile::Sinusoidal {
                mean,
                amplitude,
                freq,
            } => mean >= amplitude.abs() && freq >= 0.0 && mean.is_finite() && freq.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "normal load must stay finite and non-negative".into(),
            ))
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match *self {
            LoadProfile::Constant { value } => value,
            LoadProfile::Sinusoidal {
                mean,
                amplitude,
                freq,
            } => mean + amplitude * (2.0 * PI * freq * t).sin(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reversals_alternate() {
        let k = Kinematics::Sinusoidal {
            amplitude_m: 0.03,
            swipe_freq: 0.5,
        };
        assert_eq!(k.last_reversal(0.0), Some((0.0, 1.0)));
        assert_eq!(k.last_reversal(0.99), Some((0.0, 1.0)));
        assert_eq!(k.last_reversal(1.0), Some((1.0, -1.0)));
        assert_eq!(k.last_reversal(2.5), Some((2.0, 1.0)));
        assert!(k.velocity(0.5) > 0.0 && k.velocity(1.5) < 0.0);
    }
}
