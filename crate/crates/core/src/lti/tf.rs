use super::{check_freq_grid, poly, FrequencyResponse};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relative threshold under which a denominator evaluation counts as zero.
const POLE_ON_AXIS_TOL: f64 = 1e-12;

/// Continuous-time rational transfer function `num(s) / den(s)`, coefficients
/// in descending powers of `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfRepr")]
pub struct RationalTF {
    num: Vec<f64>,
    den: Vec<f64>,
}

#[derive(Deserialize)]
struct TfRepr {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<TfRepr> for RationalTF {
    type Error = Error;
    fn try_from(r: TfRepr) -> Result<Self> {
        RationalTF::new(r.num, r.den)
    }
}

impl RationalTF {
    /// Leading zeros are stripped from both polynomials.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.is_empty() || den.is_empty() {
            return Err(Error::InvalidParameter("empty coefficient list".into()));
        }
        if num.iter().chain(&den).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        if poly::is_zero(&den) {
            return Err(Error::InvalidParameter(
                "denominator is identically zero".into(),
            ));
        }
        Ok(Self {
            num: poly::trim(&num),
            den: poly::trim(&den),
        })
    }

    pub fn constant(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
        }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        poly::is_zero(&self.num)
    }

    pub fn is_proper(&self) -> bool {
        self.is_zero() || poly::degree(&self.num) <= poly::degree(&self.den)
    }

    /// Value at a complex point, without the pole check.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly::eval(&self.num, s) / poly::eval(&self.den, s)
    }

    /// Value at `s = j 2 pi f`.
    pub fn at_hz(&self, f: f64) -> Result<Complex64> {
        let s = Complex64::new(0.0, 2.0 * PI * f);
        let d = poly::eval(&self.den, s);
        if d.norm() <= POLE_ON_AXIS_TOL * poly::eval_scale(&self.den, s) {
            return Err(Error::PoleOnAxis { frequency_hz: f });
        }
        Ok(poly::eval(&self.num, s) / d)
    }

    pub fn dc_gain(&self) -> f64 {
        self.num.last().copied().unwrap_or(0.0) / self.den.last().copied().unwrap_or(1.0)
    }

    pub fn mul(&self, other: &RationalTF) -> RationalTF {
        RationalTF {
            num: poly::trim(&poly::mul(&self.num, &other.num)),
            den: poly::trim(&poly::mul(&self.den, &other.den)),
        }
        .reduced()
    }

    pub fn scale(&self, k: f64) -> RationalTF {
        RationalTF {
            num: poly::trim(&poly::scale(&self.num, k)),
            den: self.den.clone(),
        }
    }

    /// Cancels common roots at the origin and normalizes the denominator to
    /// be monic. General pole-zero cancellation is not attempted.
    pub fn reduced(&self) -> RationalTF {
        let mut num = poly::trim(&self.num);
        let mut den = poly::trim(&self.den);
        if poly::is_zero(&num) {
            return RationalTF::constant(0.0);
        }
        let k = poly::origin_multiplicity(&num).min(poly::origin_multiplicity(&den));
        num.truncate(num.len() - k);
        den.truncate(den.len() - k);
        let lead = den[0];
        RationalTF {
            num: poly::scale(&num, 1.0 / lead),
            den: poly::scale(&den, 1.0 / lead),
        }
    }

    pub fn poles(&self) -> Vec<Complex64> {
        poly::roots(&self.den)
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        poly::roots(&self.num)
    }

    /// All poles strictly in the open left half plane.
    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.re < 0.0)
    }
}

/// `gain * wn^2 / (s^2 + 2 zeta wn s + wn^2)` with `wn = 2 pi fn_hz`.
pub fn make_second_order(gain: f64, fn_hz: f64, zeta: f64) -> Result<RationalTF> {
    if !(fn_hz > 0.0 && fn_hz.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "natural frequency must be > 0, got {fn_hz}"
        )));
    }
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "damping ratio must be > 0, got {zeta}"
        )));
    }
    if !gain.is_finite() {
        return Err(Error::InvalidParameter("gain must be finite".into()));
    }
    let wn = 2.0 * PI * fn_hz;
    let wn2 = wn * wn;
    RationalTF::new(vec![gain * wn2], vec![1.0, 2.0 * zeta * wn, wn2])
}

/// Evaluates `tf` at `s = j 2 pi f` for each frequency.
pub fn freq_response(tf: &RationalTF, freqs: &[f64]) -> Result<FrequencyResponse> {
    check_freq_grid(freqs)?;
    let values = freqs
        .iter()
        .map(|&f| tf.at_hz(f))
        .collect::<Result<Vec<_>>>()?;
    FrequencyResponse::new(freqs.to_vec(), values)
}
