use super::{poly, FrequencyResponse, Signal};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Output magnitude treated as divergence by [`simulate_discrete`].
pub const DIVERGENCE_GUARD: f64 = 1e100;

/// z-domain filter `B(z^-1) / A(z^-1)` with `a[0] == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FilterRepr")]
pub struct DiscreteFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    fs: f64,
}

#[derive(Deserialize)]
struct FilterRepr {
    b: Vec<f64>,
    a: Vec<f64>,
    fs: f64,
}

impl TryFrom<FilterRepr> for DiscreteFilter {
    type Error = Error;
    fn try_from(r: FilterRepr) -> Result<Self> {
        DiscreteFilter::new(r.b, r.a, r.fs)
    }
}

impl DiscreteFilter {
    /// Normalizes so that `a[0] == 1`.
    pub fn new(b: Vec<f64>, a: Vec<f64>, fs: f64) -> Result<Self> {
        if b.is_empty() || a.is_empty() {
            return Err(Error::InvalidParameter("empty coefficient list".into()));
        }
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be > 0, got {fs}"
            )));
        }
        if b.iter().chain(&a).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        let a0 = a[0];
        if a0 == 0.0 {
            return Err(Error::InvalidParameter("a[0] must be nonzero".into()));
        }
        Ok(Self {
            b: b.iter().map(|x| x / a0).collect(),
            a: a.iter().map(|x| x / a0).collect(),
            fs,
        })
    }

    pub fn identity(fs: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![1.0], fs)
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn order(&self) -> usize {
        (self.b.len().max(self.a.len())).saturating_sub(1)
    }

    /// Multiplies the numerator by `k`.
    pub fn scale_gain(&self, k: f64) -> DiscreteFilter {
        DiscreteFilter {
            b: self.b.iter().map(|x| x * k).collect(),
            a: self.a.clone(),
            fs: self.fs,
        }
    }

    /// Value at `z`.
    pub fn eval_z(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        // coefficients are in ascending powers of z^-1
        let horner = |c: &[f64]| {
            c.iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &x| acc * zi + x)
        };
        horner(&self.b) / horner(&self.a)
    }

    /// Value at `z = exp(j 2 pi f / fs)`.
    pub fn at_hz(&self, f: f64) -> Complex64 {
        self.eval_z(Complex64::from_polar(1.0, 2.0 * PI * f / self.fs))
    }

    pub fn freq_response(&self, freqs: &[f64]) -> Result<FrequencyResponse> {
        FrequencyResponse::new(
            freqs.to_vec(),
            freqs.iter().map(|&f| self.at_hz(f)).collect(),
        )
    }

    /// Denominator as a polynomial in descending powers of z, padded so that
    /// numerator and denominator share the same degree.
    pub fn den_z(&self) -> Vec<f64> {
        let n = self.b.len().max(self.a.len());
        let mut a = self.a.clone();
        a.resize(n, 0.0);
        a
    }

    pub fn num_z(&self) -> Vec<f64> {
        let n = self.b.len().max(self.a.len());
        let mut b = self.b.clone();
        b.resize(n, 0.0);
        b
    }

    pub fn poles(&self) -> Vec<Complex64> {
        poly::roots(&self.a)
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        poly::roots(&self.b)
    }

    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    pub fn runner(&self) -> FilterRunner {
        FilterRunner::new(self)
    }
}

/// True iff every pole lies strictly inside the unit circle.
pub fn is_stable(filter: &DiscreteFilter) -> bool {
    poly::schur_stable(&filter.a)
}

/// Transposed direct-form II delay line for a [`DiscreteFilter`].
#[derive(Debug, Clone)]
pub struct FilterRunner {
    b: Vec<f64>,
    a: Vec<f64>,
    z: Vec<f64>,
}

impl FilterRunner {
    pub fn new(filter: &DiscreteFilter) -> Self {
        let n = filter.b.len().max(filter.a.len());
        let mut b = filter.b.clone();
        let mut a = filter.a.clone();
        b.resize(n, 0.0);
        a.resize(n, 0.0);
        Self {
            b,
            a,
            z: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z.first().copied().unwrap_or(0.0);
        let n = self.z.len();
        for i in 0..n {
            let next = if i + 1 < n { self.z[i + 1] } else { 0.0 };
            self.z[i] = next + self.b[i + 1] * x - self.a[i + 1] * y;
        }
        y
    }

    /// Output the next `step(x)` would produce, without advancing.
    pub fn peek(&self, x: f64) -> f64 {
        self.b[0] * x + self.z.first().copied().unwrap_or(0.0)
    }

    pub fn reset(&mut self) {
        self.z.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Sets the delay line to the steady state for a constant input `x`.
    /// Has no effect when the filter has a pole at `z = 1`.
    pub fn settle(&mut self, x: f64) {
        let asum: f64 = self.a.iter().sum();
        if asum.abs() < 1e-300 {
            return;
        }
        let y = self.b.iter().sum::<f64>() / asum * x;
        let n = self.z.len();
        let mut next = 0.0;
        for i in (0..n).rev() {
            self.z[i] = next + self.b[i + 1] * x - self.a[i + 1] * y;
            next = self.z[i];
        }
    }

    pub fn state(&self) -> &[f64] {
        &self.z
    }
}

/// Runs the difference equation from zero initial state.
///
/// Fails with [`Error::RateMismatch`] when rates differ and with
/// [`Error::Divergence`] once the output exceeds [`DIVERGENCE_GUARD`].
pub fn simulate_discrete(filter: &DiscreteFilter, input: &Signal) -> Result<Signal> {
    if (filter.fs - input.fs()).abs() > 1e-9 * filter.fs {
        return Err(Error::RateMismatch {
            expected: filter.fs,
            actual: input.fs(),
        });
    }
    let mut run = filter.runner();
    let mut out = Vec::with_capacity(input.len());
    for (i, &x) in input.samples().iter().enumerate() {
        let y = run.step(x);
        if !y.is_finite() || y.abs() > DIVERGENCE_GUARD {
            return Err(Error::Divergence { index: i });
        }
        out.push(y);
    }
    input.with_samples(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::Unit;

    fn impulse(n: usize, fs: f64) -> Signal {
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        Signal::new(x, fs, Unit::Dimensionless).unwrap()
    }

    #[test]
    fn normalizes_a0() {
        let f = DiscreteFilter::new(vec![2.0], vec![2.0, -1.0], 10.0).unwrap();
        assert_eq!(f.a(), &[1.0, -0.5]);
        assert_eq!(f.b(), &[1.0]);
    }

    #[test]
    fn stability_examples() {
        let fs = 1e4;
        assert!(is_stable(
            &DiscreteFilter::new(vec![1.0], vec![1.0, -0.5], fs).unwrap()
        ));
        assert!(!is_stable(
            &DiscreteFilter::new(vec![1.0], vec![1.0, -1.0], fs).unwrap()
        ));
    }

    #[test]
    fn identity_passes_through() {
        let x = Signal::new(vec![0.3, -1.0, 2.5, 7.0], 100.0, Unit::Newton).unwrap();
        let y = simulate_discrete(&DiscreteFilter::identity(100.0).unwrap(), &x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn unit_delay_moves_impulse() {
        let f = DiscreteFilter::new(vec![0.0, 1.0], vec![1.0], 100.0).unwrap();
        let y = simulate_discrete(&f, &impulse(5, 100.0)).unwrap();
        assert_eq!(y.samples(), &[0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn diverging_filter_tripped_by_guard() {
        // y[n] = 1.1^n crosses the guard at the first n with n*log10(1.1) > 100
        let p: f64 = 1.1;
        let f = DiscreteFilter::new(vec![1.0], vec![1.0, -p], 1.0).unwrap();
        let expect = (DIVERGENCE_GUARD.log10() / p.log10()).ceil() as usize;
        match simulate_discrete(&f, &impulse(5000, 1.0)) {
            Err(Error::Divergence { index }) => assert!(index.abs_diff(expect) <= 1, "{index}"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rate_mismatch() {
        let f = DiscreteFilter::identity(100.0).unwrap();
        assert!(matches!(
            simulate_discrete(&f, &impulse(4, 50.0)),
            Err(Error::RateMismatch { .. })
        ));
    }

    #[test]
    fn runner_matches_closed_form_single_pole() {
        let f = DiscreteFilter::new(vec![1.0], vec![1.0, -0.5], 1.0).unwrap();
        let y = simulate_discrete(&f, &impulse(20, 1.0)).unwrap();
        for (n, v) in y.samples().iter().enumerate() {
            assert!((v - 0.5f64.powi(n as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn json_shape() {
        let f = DiscreteFilter::new(vec![1.0, 0.5], vec![1.0, -0.25], 10000.0).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"b":[1.0,0.5],"a":[1.0,-0.25],"fs":10000.0}"#);
    }
}
