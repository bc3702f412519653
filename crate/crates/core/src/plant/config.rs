use super::kinematics::{Kinematics, LoadProfile};
use crate::error::{Error, Result};
use crate::lti::{make_second_order, poly, RationalTF};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

/// How the electroadhesion force is produced from the drive current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    /// Force follows the current envelope directly.
    Envelope,
    /// Force is the rectified 20 kHz carrier modulated by the current.
    Carrier,
}

impl std::str::FromStr for Fidelity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "envelope" => Ok(Fidelity::Envelope),
            "carrier" => Ok(Fidelity::Carrier),
            other => Err(Error::Config(format!("unknown fidelity '{other}'"))),
        }
    }
}

/// Virtual finger/tribometer parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    pub mu: f64,
    pub w_profile: LoadProfile,
    pub kinematics: Kinematics,
    pub p_nominal: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Fractional gain change by swipe direction: positive swipes see
    /// `1 + a`, negative swipes `1 - a`.
    pub direction_asymmetry: f64,
    /// Relative standard deviation of the slow gain drift.
    pub p_drift_std: f64,
    /// Correlation time of the gain drift, s.
    pub p_drift_tau_s: f64,
    pub carrier_freq: f64,
    /// Substep rate; `None` picks 60 kHz for envelope and 240 kHz for carrier.
    pub internal_fs: Option<f64>,
    pub control_fs: f64,
    pub noise_anchor_10hz: f64,
    pub noise_anchor_1khz: f64,
    /// Corner below which the 1/f noise flattens, Hz.
    pub noise_corner_hz: f64,
    #[serde(rename = "G")]
    pub g: RationalTF,
    #[serde(rename = "L")]
    pub l: RationalTF,
    pub adc_bits: u32,
    /// ADC spans `[-adc_full_scale, adc_full_scale]` N.
    pub adc_full_scale: f64,
    pub dac_bits: u32,
    /// DAC spans `[0, dac_full_scale]` mA.
    pub dac_full_scale: f64,
    pub stick_dwell_s: f64,
    pub partial_slip_s: f64,
    /// Breakaway force as a multiple of the Coulomb level `mu W`.
    pub breakaway_ratio: f64,
    pub fidelity: Fidelity,
}

pub fn default_g() -> RationalTF {
    make_second_order(1.0, 4400.0, 0.1).expect("valid constants")
}

pub fn default_l() -> RationalTF {
    make_second_order(1.0, 5300.0, FRAC_1_SQRT_2).expect("valid constants")
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            mu: 0.5,
            w_profile: LoadProfile::Constant { value: 0.5 },
            kinematics: Kinematics::Sinusoidal {
                amplitude_m: 0.03,
                swipe_freq: 0.4,
            },
            p_nominal: 0.06,
            p_min: 0.01,
            p_max: 0.14,
            direction_asymmetry: 0.3,
            p_drift_std: 0.1,
            p_drift_tau_s: 1.0,
            carrier_freq: 20_000.0,
            internal_fs: None,
            control_fs: 10_000.0,
            noise_anchor_10hz: 1e-3,
            noise_anchor_1khz: 1e-5,
            noise_corner_hz: 0.05,
            g: default_g(),
            l: default_l(),
            adc_bits: 14,
            adc_full_scale: 2.0,
            dac_bits: 16,
            dac_full_scale: 5.0,
            stick_dwell_s: 0.05,
            partial_slip_s: 0.05,
            breakaway_ratio: 1.2,
            fidelity: Fidelity::Envelope,
        }
    }
}

fn is_multiple(big: f64, small: f64) -> bool {
    let r = big / small;
    (r - r.round()).abs() < 1e-9 && r.round() >= 1.0
}

impl PlantConfig {
    pub fn effective_internal_fs(&self) -> f64 {
        self.internal_fs.unwrap_or(match self.fidelity {
            Fidelity::Envelope => 60_000.0,
            Fidelity::Carrier => 240_000.0,
        })
    }

    /// Substeps per control period.
    pub fn substeps(&self) -> usize {
        (self.effective_internal_fs() / self.control_fs).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu = {} must be finite and >= 0", self.mu));
        }
        if !(self.p_min > 0.0 && self.p_min <= self.p_nominal && self.p_nominal <= self.p_max) {
            return bad(format!(
                "need 0 < P_min <= P_nominal <= P_max, got {} / {} / {}",
                self.p_min, self.p_nominal, self.p_max
            ));
        }
        if !(0.0..1.0).contains(&self.direction_asymmetry) {
            return bad("direction_asymmetry must lie in [0, 1)".into());
        }
        if !(self.p_drift_std >= 0.0 && self.p_drift_tau_s > 0.0) {
            return bad("gain drift needs std >= 0 and tau > 0".into());
        }
        if !(self.control_fs > 0.0 && self.carrier_freq > 0.0) {
            return bad("rates must be positive".into());
        }
        let ifs = self.effective_internal_fs();
        if !is_multiple(ifs, self.control_fs) {
            return bad(format!(
                "control_fs {} must divide internal_fs {ifs}",
                self.control_fs
            ));
        }
        if self.fidelity == Fidelity::Carrier && ifs < 4.0 * self.carrier_freq {
            return bad(format!(
                "carrier fidelity needs internal_fs >= {} Hz",
                4.0 * self.carrier_freq
            ));
        }
        if !(self.noise_anchor_10hz >= 0.0 && self.noise_anchor_1khz >= 0.0) {
            return bad("noise anchors must be >= 0".into());
        }
        if !(self.noise_corner_hz > 0.0 && self.noise_corner_hz < 10.0) {
            return bad("noise corner must lie in (0, 10) Hz".into());
        }
        if !(1..=32).contains(&self.adc_bits) || !(1..=32).contains(&self.dac_bits) {
            return bad("converter resolution must be 1-32 bits".into());
        }
        if !(self.adc_full_scale > 0.0 && self.dac_full_scale > 0.0) {
            return bad("converter full scales must be positive".into());
        }
        if !(self.stick_dwell_s >= 0.0 && self.partial_slip_s >= 0.0) {
            return bad("contact phase durations must be >= 0".into());
        }
        if !(self.breakaway_ratio >= 1.0) {
            return bad("breakaway_ratio must be >= 1".into());
        }
        if let Some(half) = self.kinematics.half_period() {
            if self.stick_dwell_s + self.partial_slip_s >= half {
                return bad("stick dwell plus partial slip must be shorter than a swipe".into());
            }
        }
        self.kinematics.validate()?;
        self.w_profile.validate()?;
        for (name, tf) in [("G", &self.g), ("L", &self.l)] {
            if !tf.is_proper() || !tf.is_stable() {
                return bad(format!("{name} must be proper and stable"));
            }
        }
        let gl = self.g.mul(&self.l);
        if poly::degree(gl.num()) >= poly::degree(gl.den()) {
            return bad("G L must be strictly proper".into());
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: PlantConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_roundtrip() {
        let cfg = PlantConfig::default();
        cfg.validate().unwrap();
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(PlantConfig::from_json(&s).unwrap(), cfg);
        assert_eq!(cfg.substeps(), 6);
    }

    #[test]
    fn l_attenuates_35_db_at_40_khz() {
        let db = 20.0 * default_l().at_hz(40_000.0).unwrap().norm().log10();
        assert!((-36.0..=-34.0).contains(&db), "{db}");
    }

    #[test]
    fn rejects_bad_gain_ordering_and_slow_carrier_rate() {
        let cfg = PlantConfig {
            p_min: 0.1,
            ..PlantConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = PlantConfig {
            fidelity: Fidelity::Carrier,
            internal_fs: Some(60_000.0),
            ..PlantConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
