//! Double-double arithmetic.
//!
//! A value is the unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`, giving
//! roughly 32 significant decimal digits. Only the operations needed by the
//! series kernels are provided: the four field operations, `exp`, `ln`,
//! `sin(pi x)` and log-gamma.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
pub(super) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

#[cfg(target_feature = "fma")]
#[inline]
pub(super) fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

// Without hardware FMA, mul_add is a slow library call; Dekker's split is
// exact as long as the operands are far from overflow.
#[cfg(not(target_feature = "fma"))]
#[inline]
pub(super) fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    if !p.is_finite() || a.abs() > 1e290 || b.abs() > 1e290 {
        return (p, a.mul_add(b, -p));
    }
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, e)
}

#[cfg(not(target_feature = "fma"))]
#[inline]
fn split(a: f64) -> (f64, f64) {
    const SPLITTER: f64 = 134_217_729.0; // 2^27 + 1
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.3190468138462996e-17,
    };
    pub const PI: Dd = Dd {
        hi: std::f64::consts::PI,
        lo: 1.2246467991473532e-16,
    };
    pub const HALF_LN_2PI: Dd = Dd {
        hi: 0.9189385332046728,
        lo: -3.8782941580672414e-17,
    };

    #[inline]
    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    #[inline]
    pub const fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.hi.is_finite()
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Multiplication by an exact power of two.
    #[inline]
    pub fn ldexp(self, e: i32) -> Self {
        let s = if (-1022..=1023).contains(&e) {
            f64::from_bits(((e + 1023) as u64) << 52)
        } else {
            2f64.powi(e)
        };
        Dd {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    #[inline]
    pub fn sqr(self) -> Self {
        self * self
    }

    pub fn recip(self) -> Self {
        Dd::ONE / self
    }

    /// Nearest integer, ties away from zero.
    pub fn round(self) -> Self {
        let hi = self.hi.round();
        if hi == self.hi {
            let lo = self.lo.round();
            let (s, e) = quick_two_sum(hi, lo);
            Dd { hi: s, lo: e }
        } else if (hi - self.hi).abs() == 0.5 && self.lo != 0.0 {
            // hi sits exactly on a half; lo decides the direction
            let adj = if self.lo > 0.0 {
                self.hi + 0.5
            } else {
                self.hi - 0.5
            };
            Dd::from_f64(adj)
        } else {
            Dd::from_f64(hi)
        }
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.78 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi < -745.2 {
            return Dd::ZERO;
        }
        if self.hi == 0.0 {
            return Dd::ONE;
        }
        // x = k ln2 + r, |r| <= ln2/2, then r is scaled by 2^-10 so the
        // Taylor series converges in a handful of terms.
        let k = (self.hi / Dd::LN2.hi).round();
        let r = self - Dd::LN2 * k;
        let r = r.ldexp(-10);
        // |r| < 3.4e-4, so terms past r^8/8! are below the double-double ulp
        let mut sum = INV_FACT[INV_FACT.len() - 1];
        for c in INV_FACT.iter().rev().skip(1) {
            sum = sum * r + *c;
        }
        let mut sum = sum * r.sqr() + r;
        // (1 + s)^(2^10) via s <- 2s + s^2 to keep precision near 1
        for _ in 0..10 {
            sum = sum.ldexp(1) + sum.sqr();
        }
        (sum + Dd::ONE).ldexp(k as i32)
    }

    pub fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::from_f64(f64::NAN);
        }
        if !self.hi.is_finite() {
            return self;
        }
        // one Newton step on exp(y) = x from the f64 logarithm
        let y = Dd::from_f64(self.hi.ln());
        y + self * (-y).exp() - Dd::ONE
    }

    pub fn powf(self, e: Dd) -> Self {
        if self.hi == 0.0 {
            return if e.hi > 0.0 { Dd::ZERO } else { Dd::ONE };
        }
        (e * self.ln()).exp()
    }

    /// `sin(pi * self)` with exact reduction modulo 2.
    pub fn sin_pi(self) -> Self {
        let n = self.round();
        let r = self - n; // |r| <= 1/2, exact
        let odd = (n.hi as i64 + n.lo as i64).rem_euclid(2) == 1;
        let x = r * Dd::PI;
        let x2 = x.sqr();
        let mut term = x;
        let mut sum = x;
        let mut k = 1.0;
        loop {
            term = -(term * x2) / ((2.0 * k) * (2.0 * k + 1.0));
            sum += term;
            k += 1.0;
            if term.hi.abs() <= 1e-34 * sum.hi.abs().max(1e-300) || k > 40.0 {
                break;
            }
        }
        if odd {
            -sum
        } else {
            sum
        }
    }

    /// `(ln|Γ(x)|, sign Γ(x))`. Poles give `(+inf, 0)`.
    pub fn ln_gamma(self) -> (Dd, f64) {
        if self.hi <= 0.0 {
            let r = self.round();
            if r == self {
                return (Dd::from_f64(f64::INFINITY), 0.0);
            }
            // Γ(x) Γ(1-x) = π / sin(πx)
            let s = self.sin_pi();
            let (lg, sg) = (Dd::ONE - self).ln_gamma();
            let val = Dd::PI.ln() - s.abs().ln() - lg;
            let sign = if s.hi < 0.0 { -sg } else { sg };
            return (val, sign);
        }
        const SHIFT: f64 = 32.0;
        let mut x = self;
        let mut prod = Dd::ONE;
        let mut shifted = false;
        while x.hi < SHIFT {
            prod *= x;
            x += Dd::ONE;
            shifted = true;
        }
        let lg = stirling(x);
        if shifted {
            (lg - prod.ln(), 1.0)
        } else {
            (lg, 1.0)
        }
    }
}

/// 1/n! for n = 2..=8.
const INV_FACT: [Dd; 7] = [
    Dd::new(0.5, 0.0),
    Dd::new(0.16666666666666666, 9.25185853854297e-18),
    Dd::new(0.041666666666666664, 2.3129646346357427e-18),
    Dd::new(0.008333333333333333, 1.1564823173178714e-19),
    Dd::new(0.001388888888888889, -5.300543954373577e-20),
    Dd::new(0.0001984126984126984, 1.7209558293420705e-22),
    Dd::new(2.48015873015873e-05, 2.1511947866775882e-23),
];

/// B_2n / (2n (2n-1)) for n = 1..=14.
const STIRLING: [Dd; 14] = [
    Dd::new(0.08333333333333333, 4.625929269271485e-18),
    Dd::new(-0.002777777777777778, 1.0601087908747154e-19),
    Dd::new(0.0007936507936507937, 6.883823317368282e-22),
    Dd::new(-0.0005952380952380953, 5.36938218754726e-20),
    Dd::new(0.0008417508417508417, 3.6870174889237694e-20),
    Dd::new(-0.0019175269175269176, 1.0675702776872475e-19),
    Dd::new(0.00641025641025641, 2.2240044563805217e-19),
    Dd::new(-0.029550653594771242, 4.861760957508855e-19),
    Dd::new(0.17964437236883057, -6.401600482710946e-19),
    Dd::new(-1.3924322169059011, 1.5837056989230303e-17),
    Dd::new(13.402864044168393, -6.154114101993966e-16),
    Dd::new(-156.84828462600203, 9.391823141715389e-15),
    Dd::new(2193.1033333333335, -1.3339255626002948e-13),
    Dd::new(-36108.77125372499, 5.897583353514365e-13),
];

// ln Γ(x) for x >= 32 by the Stirling series.
fn stirling(x: Dd) -> Dd {
    let lnx = x.ln();
    let inv = x.recip();
    let inv2 = inv.sqr();
    let mut acc = Dd::ZERO;
    for c in STIRLING.iter().rev() {
        acc = acc * inv2 + *c;
    }
    (x - 0.5) * lnx - x + Dd::HALF_LN_2PI + acc * inv
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::from_f64(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let e = e + t;
        let (s, e) = quick_two_sum(s, e);
        let e = e + f;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: f64) -> Dd {
        let (s, e) = two_sum(self.hi, b);
        let e = e + self.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: f64) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + q3
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, b: f64) -> Dd {
        self / Dd::from_f64(b)
    }
}

impl AddAssign for Dd {
    #[inline]
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl SubAssign for Dd {
    #[inline]
    fn sub_assign(&mut self, b: Dd) {
        *self = *self - b;
    }
}

impl MulAssign for Dd {
    #[inline]
    fn mul_assign(&mut self, b: Dd) {
        *self = *self * b;
    }
}
