//! Dense real polynomials stored as coefficient slices in descending powers.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Product of two polynomials.
pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Sum of two polynomials, aligned on the constant term.
pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (k, &x) in a.iter().rev().enumerate() {
        out[n - 1 - k] += x;
    }
    for (k, &y) in b.iter().rev().enumerate() {
        out[n - 1 - k] += y;
    }
    out
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|x| x * k).collect()
}

pub fn neg(a: &[f64]) -> Vec<f64> {
    scale(a, -1.0)
}

/// Drops leading zero coefficients. An all-zero polynomial becomes `[0.0]`.
pub fn trim(a: &[f64]) -> Vec<f64> {
    match a.iter().position(|&x| x != 0.0) {
        Some(i) => a[i..].to_vec(),
        None => vec![0.0],
    }
}

pub fn is_zero(a: &[f64]) -> bool {
    a.iter().all(|&x| x == 0.0)
}

/// Degree after trimming; the zero polynomial has degree 0.
pub fn degree(a: &[f64]) -> usize {
    trim(a).len() - 1
}

/// Horner evaluation at a complex point.
pub fn eval(a: &[f64], s: Complex64) -> Complex64 {
    a.iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Sum of |c_k| |s|^k, the natural magnitude scale of `eval(a, s)`.
pub fn eval_scale(a: &[f64], s: Complex64) -> f64 {
    let r = s.norm();
    a.iter().fold(0.0, |acc, &c| acc * r + c.abs())
}

/// Number of trailing zero coefficients (roots at the origin).
pub fn origin_multiplicity(a: &[f64]) -> usize {
    let t = trim(a);
    if is_zero(&t) {
        return 0;
    }
    t.iter().rev().take_while(|&&x| x == 0.0).count()
}

/// Roots via eigenvalues of the companion matrix.
pub fn roots(a: &[f64]) -> Vec<Complex64> {
    let a = trim(a);
    let n = a.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = a[0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        m[(0, j)] = -a[j + 1] / lead;
    }
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Monic polynomial with the given roots. Complex roots must come in
/// conjugate pairs; imaginary residue is discarded.
pub fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut p = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); p.len() + 1];
        for (i, &c) in p.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        p = next;
    }
    p.iter().map(|c| c.re).collect()
}

/// Schur-Cohn step-down test: true iff every root of `a` (descending powers
/// of z) lies strictly inside the unit circle.
pub fn schur_stable(a: &[f64]) -> bool {
    let a = trim(a);
    if a.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let lead = a[0];
    let mut p: Vec<f64> = a.iter().map(|x| x / lead).collect();
    while p.len() > 1 {
        let n = p.len() - 1;
        let k = p[n];
        if k.abs() >= 1.0 {
            return false;
        }
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..n).map(|i| (p[i] - k * p[n - i]) / denom).collect();
        p = next;
    }
    true
}
