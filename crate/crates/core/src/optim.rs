//! Small dense Levenberg-Marquardt solver used by the frequency-domain fits.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the relative cost decrease of an accepted step falls below this.
    pub ftol: f64,
    /// Stop when the relative step length falls below this.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 400,
            ftol: 1e-15,
            xtol: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn jacobian<F>(f: &F, p: &[f64], r0: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = r0.len();
    let n = p.len();
    let mut j = DMatrix::zeros(m, n);
    let mut q = p.to_vec();
    for k in 0..n {
        let h = 1e-7 * p[k].abs().max(1e-4);
        q[k] = p[k] + h;
        let rp = f(&q);
        q[k] = p[k] - h;
        let rm = f(&q);
        q[k] = p[k];
        if rp.len() != m || rm.len() != m {
            return None;
        }
        for i in 0..m {
            let d = (rp[i] - rm[i]) / (2.0 * h);
            if !d.is_finite() {
                return None;
            }
            j[(i, k)] = d;
        }
    }
    Some(j)
}

/// Minimizes `sum(residuals(p)^2)` starting from `p0`.
pub fn levenberg_marquardt<F>(residuals: F, p0: &[f64], opts: LmOptions) -> LmResult
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut p = p0.to_vec();
    let mut r = residuals(&p);
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return LmResult {
            params: p,
            cost: f64::INFINITY,
            iterations: 0,
            converged: false,
        };
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iter = 0;
    while iter < opts.max_iter {
        iter += 1;
        let Some(j) = jacobian(&residuals, &p, &r) else {
            break;
        };
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let rt = residuals(&trial);
            let ct = sum_sq(&rt);
            if ct.is_finite() && ct < cost {
                let rel_f = (cost - ct) / cost.max(1e-300);
                let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                let sn = step.norm();
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                if rel_f < opts.ftol || sn < opts.xtol * (pn + opts.xtol) || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !accepted {
            // no downhill step at any damping: local minimum to working precision
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    LmResult {
        params: p,
        cost,
        iterations: iter,
        converged,
    }
}
