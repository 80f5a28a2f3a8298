//! Gamma function by the Lanczos approximation (g = 7, nine coefficients),
//! with the reflection formula below one half.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;

#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Largest argument for which Γ(x) is finite in f64.
pub const GAMMA_MAX_ARG: f64 = 171.624_376_956_302_7;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
fn lanczos_sum(x: f64) -> f64 {
    // x here is the shifted argument (x - 1)
    let mut a = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Γ(x) for finite `x` that is not a non-positive integer.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("gamma of non-finite argument {x}")));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::Pole { x });
    }
    if x > GAMMA_MAX_ARG {
        return Err(Error::Overflow(format!("gamma({x}) exceeds f64 range")));
    }
    if x < 0.5 {
        // Γ(x) Γ(1-x) = π / sin(πx)
        let s = sin_pi(x);
        let g = gamma(1.0 - x)?;
        let v = PI / (s * g);
        return if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow(format!("gamma({x}) exceeds f64 range")))
        };
    }
    if x == x.floor() && x <= 23.0 {
        // exact factorials
        let mut p = 1.0;
        let mut k = 2.0;
        while k < x {
            p *= k;
            k += 1.0;
        }
        return Ok(p);
    }
    let xm = x - 1.0;
    let t = xm + LANCZOS_G + 0.5;
    // split the power to stay finite up to GAMMA_MAX_ARG
    let half = t.powf(0.5 * (xm + 0.5));
    let v = (2.0 * PI).sqrt() * half * (half * (-t).exp()) * lanczos_sum(xm);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("gamma({x}) exceeds f64 range")))
    }
}

/// `(ln|Γ(x)|, sign Γ(x))`, with `(inf, 0.0)` at the poles.
pub fn ln_gamma_signed(x: f64) -> (f64, f64) {
    if is_nonpositive_integer(x) {
        return (f64::INFINITY, 0.0);
    }
    if x < 0.5 {
        let s = sin_pi(x);
        let (lg, sg) = ln_gamma_signed(1.0 - x);
        let v = PI.ln() - s.abs().ln() - lg;
        return (v, if s < 0.0 { -sg } else { sg });
    }
    let xm = x - 1.0;
    let t = xm + LANCZOS_G + 0.5;
    let v = HALF_LN_2PI + (xm + 0.5) * t.ln() - t + lanczos_sum(xm).ln();
    (v, 1.0)
}

/// ln|Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    ln_gamma_signed(x).0
}

/// 1/Γ(x), entire: exactly zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    if x < GAMMA_MAX_ARG && x > -GAMMA_MAX_ARG {
        if let Ok(g) = gamma(x) {
            return 1.0 / g;
        }
    }
    let (lg, s) = ln_gamma_signed(x);
    s * (-lg).exp()
}

// sin(πx) with the argument reduced exactly modulo 2.
fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let r = x - n;
    let s = (PI * r).sin();
    if (n as i64).rem_euclid(2) == 1 {
        -s
    } else {
        s
    }
}
