//! Closed-loop algebra for the friction loop
//!
//! ```text
//!   f_r --(+)--> C --> P --+--> f_f
//!          ^-              |
//!          +---- L <- G <--+
//! ```
//!
//! `T = C P / (1 + C P L G)` and, solved for the controller,
//! `C = T / (P (1 - T L G))`.

use crate::error::{Error, Result};
use crate::lti::{poly, RationalTF};
use num_complex::Complex64;

fn max_abs(p: &[f64]) -> f64 {
    p.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Zero up to rounding of the operands it was formed from.
fn numerically_zero(p: &[f64], scale: f64) -> bool {
    max_abs(p) <= 1e-12 * scale
}

/// Sensitivity `T = C P / (1 + C P L G)` as a rational function.
#[allow(non_snake_case)]
pub fn closed_loop_T(
    c: &RationalTF,
    p: &RationalTF,
    l: &RationalTF,
    g: &RationalTF,
) -> Result<RationalTF> {
    let cp_num = poly::mul(c.num(), p.num());
    let cp_den = poly::mul(c.den(), p.den());
    let lg_num = poly::mul(l.num(), g.num());
    let lg_den = poly::mul(l.den(), g.den());
    if poly::is_zero(&cp_num) {
        return Ok(RationalTF::constant(0.0));
    }
    let num = poly::mul(&cp_num, &lg_den);
    let a = poly::mul(&cp_den, &lg_den);
    let b = poly::mul(&cp_num, &lg_num);
    let den = poly::add(&a, &b);
    if numerically_zero(&den, max_abs(&a).max(max_abs(&b))) {
        return Err(Error::Degeneracy("1 + C P L G vanishes identically".into()));
    }
    let t = RationalTF::new(num, den)?;
    if !t.is_proper() {
        return Err(Error::Degeneracy(format!(
            "closed loop is improper (numerator degree {} > denominator degree {})",
            poly::degree(t.num()),
            poly::degree(t.den())
        )));
    }
    Ok(t.reduced())
}

/// Controller realizing the target sensitivity: `C = T / (P (1 - T L G))`.
pub fn synthesize_ideal(
    t: &RationalTF,
    p: &RationalTF,
    l: &RationalTF,
    g: &RationalTF,
) -> Result<RationalTF> {
    if p.is_zero() {
        return Err(Error::SingularDesign(
            "actuation gain P is identically zero".into(),
        ));
    }
    let lg_num = poly::mul(l.num(), g.num());
    let lg_den = poly::mul(l.den(), g.den());
    // 1 - T L G = (Td Ld Gd - Tn Ln Gn) / (Td Ld Gd)
    let x = poly::mul(t.den(), &lg_den);
    let y = poly::mul(t.num(), &lg_num);
    let diff = poly::add(&x, &poly::neg(&y));
    if numerically_zero(&diff, max_abs(&x).max(max_abs(&y))) {
        return Err(Error::SingularDesign(
            "1 - T L G vanishes identically".into(),
        ));
    }
    let num = poly::mul(&poly::mul(t.num(), &lg_den), p.den());
    let den = poly::mul(&diff, p.num());
    Ok(RationalTF::new(num, den)?.reduced())
}

/// Pointwise ideal controller `T / (P (1 - T L G H))` where `h` is an extra
/// factor in the measurement path (for example a sample-and-hold delay).
pub fn ideal_controller_at(
    t: Complex64,
    p: Complex64,
    l: Complex64,
    g: Complex64,
    h: Complex64,
) -> Complex64 {
    t / (p * (Complex64::new(1.0, 0.0) - t * l * g * h))
}
