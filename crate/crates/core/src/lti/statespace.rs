//! Single-input single-output state-space models and their zero-order-hold
//! discretization.

use super::{poly, DiscreteFilter, RationalTF};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Continuous-time `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl StateSpace {
    /// Controllable canonical realization of a proper transfer function.
    ///
    /// The time axis is rescaled by the geometric mean pole magnitude before
    /// building the companion matrix so that fast dynamics (kHz poles) do not
    /// produce coefficients spanning twenty orders of magnitude.
    pub fn from_tf(tf: &RationalTF) -> Result<Self> {
        if !tf.is_proper() {
            return Err(Error::InvalidParameter(
                "improper transfer function has no state-space realization".into(),
            ));
        }
        let lead = tf.den()[0];
        let den: Vec<f64> = tf.den().iter().map(|x| x / lead).collect();
        let mut num: Vec<f64> = tf.num().iter().map(|x| x / lead).collect();
        while num.len() < den.len() {
            num.insert(0, 0.0);
        }
        let n = den.len() - 1;
        let time_scale = match den[n].abs() {
            x if x > 0.0 => x.powf(1.0 / n.max(1) as f64),
            _ => 1.0,
        };
        // With s = c * sigma the sigma-domain coefficients are O(1); the
        // realization in real time is then A = c A_sigma, B = c B_sigma.
        let c = time_scale;
        let dt: Vec<f64> = (0..=n).map(|k| den[k] / c.powi(k as i32)).collect();
        let nt: Vec<f64> = (0..=n).map(|k| num[k] / c.powi(k as i32)).collect();
        let d = nt[0];
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            a[(0, j)] = -dt[j + 1] * c;
        }
        for i in 1..n {
            a[(i, i - 1)] = c;
        }
        let mut b = DVector::zeros(n);
        if n > 0 {
            b[0] = c;
        }
        let cv = DVector::from_iterator(n, (0..n).map(|i| nt[i + 1] - d * dt[i + 1]));
        Ok(Self { a, b, c: cv, d })
    }

    pub fn order(&self) -> usize {
        self.b.len()
    }

    /// Transfer function value at complex `s`.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let n = self.order();
        if n == 0 {
            return Complex64::new(self.d, 0.0);
        }
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let id = if i == j { s } else { Complex64::new(0.0, 0.0) };
            id - Complex64::new(self.a[(i, j)], 0.0)
        });
        let rhs =
            DVector::<Complex64>::from_iterator(n, self.b.iter().map(|&x| Complex64::new(x, 0.0)));
        let x = m
            .lu()
            .solve(&rhs)
            .unwrap_or_else(|| DVector::from_element(n, Complex64::new(f64::NAN, 0.0)));
        self.c
            .iter()
            .zip(x.iter())
            .map(|(&c, &v)| v * c)
            .sum::<Complex64>()
            + self.d
    }
}

/// Discrete-time `x[k+1] = Ad x[k] + Bd u[k]`, `y[k] = C x[k] + D u[k]`.
#[derive(Debug, Clone)]
pub struct DiscreteStateSpace {
    n: usize,
    ad: Vec<f64>,
    bd: Vec<f64>,
    c: Vec<f64>,
    d: f64,
    x: Vec<f64>,
    scratch: Vec<f64>,
    pub fs: f64,
}

impl DiscreteStateSpace {
    pub fn order(&self) -> usize {
        self.n
    }

    /// Output for input `u` at the current state, then advance one step.
    pub fn step(&mut self, u: f64) -> f64 {
        let n = self.n;
        let y = self.output(u);
        for i in 0..n {
            let row = &self.ad[i * n..(i + 1) * n];
            let mut acc = self.bd[i] * u;
            for (a, x) in row.iter().zip(&self.x) {
                acc += a * x;
            }
            self.scratch[i] = acc;
        }
        std::mem::swap(&mut self.x, &mut self.scratch);
        y
    }

    pub fn output(&self, u: f64) -> f64 {
        self.c.iter().zip(&self.x).map(|(c, x)| c * x).sum::<f64>() + self.d * u
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn reset(&mut self) {
        self.x.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Sets the state to the equilibrium for a constant input `u`.
    pub fn settle(&mut self, u: f64) {
        let n = self.n;
        if n == 0 {
            return;
        }
        let m = DMatrix::from_fn(n, n, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - self.ad[i * n + j]
        });
        let rhs = DVector::from_iterator(n, self.bd.iter().map(|b| b * u));
        if let Some(x) = m.lu().solve(&rhs) {
            self.x.copy_from_slice(x.as_slice());
        }
    }

    /// Markov parameters `h[0] = D`, `h[k] = C Ad^(k-1) Bd`.
    pub fn markov(&self, count: usize) -> Vec<f64> {
        let n = self.n;
        let mut h = Vec::with_capacity(count);
        h.push(self.d);
        let mut v = self.bd.clone();
        for _ in 1..count {
            h.push(self.c.iter().zip(&v).map(|(c, x)| c * x).sum());
            v = (0..n)
                .map(|i| (0..n).map(|j| self.ad[i * n + j] * v[j]).sum())
                .collect();
        }
        h
    }

    /// Equivalent transfer function in z^-1 form.
    pub fn to_filter(&self) -> Result<DiscreteFilter> {
        let n = self.n;
        if n == 0 {
            return DiscreteFilter::new(vec![self.d], vec![1.0], self.fs);
        }
        let ad = DMatrix::from_row_slice(n, n, &self.ad);
        let eig: Vec<Complex64> = ad.complex_eigenvalues().iter().copied().collect();
        let a = poly::from_roots(&eig);
        let h = self.markov(n + 1);
        let b: Vec<f64> = (0..=n)
            .map(|k| (0..=k).map(|i| a[i] * h[k - i]).sum())
            .collect();
        DiscreteFilter::new(b, a, self.fs)
    }
}

/// Zero-order-hold equivalent at sample rate `fs`.
pub fn zoh_discretize(tf: &RationalTF, fs: f64) -> Result<DiscreteStateSpace> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sample rate must be > 0, got {fs}"
        )));
    }
    let ss = StateSpace::from_tf(tf)?;
    let n = ss.order();
    let dt = 1.0 / fs;
    let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = ss.a[(i, j)] * dt;
        }
        aug[(i, n)] = ss.b[i] * dt;
    }
    let e = aug.exp();
    let mut ad = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            ad.push(e[(i, j)]);
        }
    }
    let bd = (0..n).map(|i| e[(i, n)]).collect();
    Ok(DiscreteStateSpace {
        n,
        ad,
        bd,
        c: ss.c.iter().copied().collect(),
        d: ss.d,
        x: vec![0.0; n],
        scratch: vec![0.0; n],
        fs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::make_second_order;
    use std::f64::consts::PI;

    #[test]
    fn realization_matches_tf() {
        let g = make_second_order(1.0, 4400.0, 0.1).unwrap();
        let l = make_second_order(1.0, 5300.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let gl = g.mul(&l);
        let ss = StateSpace::from_tf(&gl).unwrap();
        for f in [10.0, 300.0, 4400.0, 20_000.0] {
            let s = Complex64::new(0.0, 2.0 * PI * f);
            let want = gl.eval(s);
            let got = ss.eval(s);
            assert!(
                (want - got).norm() < 1e-9 * want.norm().max(1e-12),
                "{f}: {want} vs {got}"
            );
        }
    }

    #[test]
    fn zoh_first_order_closed_form() {
        // 1/(tau s + 1): Ad = exp(-T/tau), Bd = 1 - Ad
        let tau: f64 = 1e-3;
        let tf = RationalTF::new(vec![1.0], vec![tau, 1.0]).unwrap();
        let fs = 10_000.0;
        let mut d = zoh_discretize(&tf, fs).unwrap();
        let ad = (-1.0 / (fs * tau)).exp();
        let filt = d.to_filter().unwrap();
        assert!((filt.a()[1] + ad).abs() < 1e-12);
        assert!((filt.b()[1] - (1.0 - ad)).abs() < 1e-12);
        // step response
        let mut y = 0.0;
        for _ in 0..5 {
            y = d.step(1.0);
        }
        assert!((y - (1.0 - ad.powi(4))).abs() < 1e-12);
    }

    #[test]
    fn zoh_preserves_dc_gain() {
        let g = make_second_order(2.0, 4400.0, 0.1).unwrap();
        let d = zoh_discretize(&g, 60_000.0).unwrap();
        let f = d.to_filter().unwrap();
        assert!((f.dc_gain() - 2.0).abs() < 1e-9);
    }
}
