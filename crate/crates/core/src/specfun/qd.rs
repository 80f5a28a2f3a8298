//! Quad-double arithmetic: a value is the unevaluated sum of four
//! non-overlapping doubles, about 64 significant decimal digits.
//!
//! Only used to re-evaluate series pieces whose cancellation exhausts
//! double-double precision, so the operation set mirrors `Dd` and speed is
//! secondary to robustness: every sum is renormalized by an error-free
//! transformation followed by a branching compression.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

use super::dd::{two_prod, two_sum, Dd};

#[derive(Clone, Copy, Default, PartialEq)]
pub struct Qd(pub [f64; 4]);

// Exact in-place transformation: afterwards x[0] holds the rounded sum and
// the tail holds the errors, with the total unchanged.
#[inline]
fn vec_sum<const N: usize>(x: &mut [f64; N]) {
    let mut s = x[N - 1];
    for i in (0..N - 1).rev() {
        let (hi, lo) = two_sum(x[i], s);
        s = hi;
        x[i + 1] = lo;
    }
    x[0] = s;
}

// Sum of the inputs rounded to four components.
fn renorm<const N: usize>(mut x: [f64; N]) -> Qd {
    if !x[0].is_finite() {
        return Qd([x[0], 0.0, 0.0, 0.0]);
    }
    vec_sum(&mut x);
    vec_sum(&mut x);
    let mut out = [0.0; 4];
    let mut j = 0;
    let mut eps = x[0];
    for &xi in x.iter().skip(1) {
        let (r, e) = two_sum(eps, xi);
        if e != 0.0 {
            out[j] = r;
            j += 1;
            if j == 4 {
                return Qd(out);
            }
            eps = e;
        } else {
            eps = r;
        }
    }
    if eps != 0.0 {
        out[j] = eps;
    }
    Qd(out)
}

impl Qd {
    pub const ZERO: Qd = Qd([0.0; 4]);
    pub const ONE: Qd = Qd([1.0, 0.0, 0.0, 0.0]);
    pub const LN2: Qd = Qd::new([std::f64::consts::LN_2, 2.3190468138462996e-17, 5.707708438416212e-34, -3.5824322106018114e-50]);
    pub const PI: Qd = Qd::new([std::f64::consts::PI, 1.2246467991473532e-16, -2.9947698097183397e-33, 1.1124542208633653e-49]);
    pub const HALF_LN_2PI: Qd = Qd::new([0.9189385332046728, -3.8782941580672414e-17, -1.323971596849807e-33, 5.150860436871684e-50]);

    pub const fn new(c: [f64; 4]) -> Self {
        Qd(c)
    }

    pub fn from_f64(x: f64) -> Self {
        Qd([x, 0.0, 0.0, 0.0])
    }

    pub fn from_dd(x: Dd) -> Self {
        Qd([x.hi, x.lo, 0.0, 0.0])
    }

    pub fn to_f64(self) -> f64 {
        self.0[0] + (self.0[1] + (self.0[2] + self.0[3]))
    }

    pub fn to_dd(self) -> Dd {
        let (hi, lo) = two_sum(self.0[0], self.0[1] + (self.0[2] + self.0[3]));
        Dd::new(hi, lo)
    }

    pub fn abs(self) -> Self {
        if self.0[0] < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn ldexp(self, e: i32) -> Self {
        let s = if (-1022..=1023).contains(&e) {
            f64::from_bits(((e + 1023) as u64) << 52)
        } else {
            2f64.powi(e)
        };
        Qd(self.0.map(|c| c * s))
    }

    pub fn sqr(self) -> Self {
        self * self
    }

    /// Nearest integer, ties away from zero.
    fn round(self) -> Self {
        let c = self.0;
        let hi = c[0].round();
        if hi == c[0] {
            let rest = Qd([c[1], c[2], c[3], 0.0]);
            return if rest.0[0] == 0.0 {
                self
            } else {
                rest.round() + hi
            };
        }
        if (hi - c[0]).abs() == 0.5 && c[1] != 0.0 {
            // on a half; the next word decides the direction
            return Qd::from_f64(c[0] + 0.5 * c[1].signum());
        }
        Qd::from_f64(hi)
    }

    pub fn exp(self) -> Self {
        let x = self.0[0];
        if x > 709.78 {
            return Qd::from_f64(f64::INFINITY);
        }
        if x < -745.2 {
            return Qd::ZERO;
        }
        if x == 0.0 {
            return Qd::ONE;
        }
        let k = (x / Qd::LN2.0[0]).round();
        let r = self - Qd::LN2 * k;
        let i = (r.0[0] * EXP_STEPS).round();
        let s = r - i / EXP_STEPS;
        // |s| <= 1/512: terms of order 10 and up are below 1e-34, so a
        // double-double tail keeps full accuracy
        let inv_fact = inverse_factorials();
        let sd = s.to_dd();
        let mut tail = inv_fact[inv_fact.len() - 1].to_dd();
        for c in inv_fact[8..inv_fact.len() - 1].iter().rev() {
            tail = tail * sd + c.to_dd();
        }
        let mut sum = Qd::from_dd(tail);
        for c in inv_fact[..8].iter().rev() {
            sum = sum * s + *c;
        }
        let e = sum * s.sqr() + s + Qd::ONE;
        (exp_table()[(i as i64 + EXP_HALF_RANGE) as usize] * e).ldexp(k as i32)
    }

    // Plain reduction by 2^-12 and squaring; only used to build the table.
    fn exp_by_squaring(self) -> Self {
        let r = self.ldexp(-12);
        let inv_fact = inverse_factorials();
        let mut sum = inv_fact[inv_fact.len() - 1];
        for c in inv_fact.iter().rev().skip(1) {
            sum = sum * r + *c;
        }
        let mut s = sum * r.sqr() + r;
        for _ in 0..12 {
            s = s.ldexp(1) + s.sqr();
        }
        s + Qd::ONE
    }

    pub fn ln(self) -> Self {
        if self.0[0] <= 0.0 {
            return Qd::from_f64(f64::NAN);
        }
        if !self.0[0].is_finite() {
            return self;
        }
        // one Newton step from the double-double logarithm doubles its digits
        let y = Qd::from_dd(self.to_dd().ln());
        y + self * (-y).exp() - Qd::ONE
    }

    pub fn sin_pi(self) -> Self {
        let n = self.round();
        let r = self - n;
        let odd = (n.0[0] as i64).rem_euclid(2) == 1;
        let x = r * Qd::PI;
        let x2 = x.sqr();
        let mut term = x;
        let mut sum = x;
        let mut k = 1.0;
        loop {
            term = -(term * x2) / ((2.0 * k) * (2.0 * k + 1.0));
            sum += term;
            k += 1.0;
            if term.0[0].abs() <= 1e-66 * sum.0[0].abs().max(1e-300) || k > 60.0 {
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
    pub fn ln_gamma(self) -> (Qd, f64) {
        if self.0[0] <= 0.0 {
            if self.round() == self {
                return (Qd::from_f64(f64::INFINITY), 0.0);
            }
            let s = self.sin_pi();
            let (lg, sg) = (Qd::ONE - self).ln_gamma();
            let val = Qd::PI.ln() - s.abs().ln() - lg;
            let sign = if s.0[0] < 0.0 { -sg } else { sg };
            return (val, sign);
        }
        const SHIFT: f64 = 64.0;
        let mut x = self;
        let mut prod = Qd::ONE;
        let mut shifted = false;
        while x.0[0] < SHIFT {
            prod = prod * x;
            x += Qd::ONE;
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

/// 1/n! for n = 2..=18.
fn inverse_factorials() -> &'static [Qd; 17] {
    static TABLE: OnceLock<[Qd; 17]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [Qd::ZERO; 17];
        let mut f = Qd::ONE;
        for (i, v) in t.iter_mut().enumerate() {
            f = f * (i + 2) as f64;
            *v = Qd::ONE / f;
        }
        t
    })
}

const EXP_STEPS: f64 = 256.0;
// |r| <= ln2/2 needs i/256 for |i| <= 89
const EXP_HALF_RANGE: i64 = 89;

/// e^(i/256) for |i| <= 89.
fn exp_table() -> &'static [Qd; 179] {
    static TABLE: OnceLock<[Qd; 179]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [Qd::ZERO; 179];
        for (i, v) in t.iter_mut().enumerate() {
            *v = Qd::from_f64((i as i64 - EXP_HALF_RANGE) as f64 / EXP_STEPS).exp_by_squaring();
        }
        t
    })
}

/// B_2n / (2n (2n-1)) for n = 1..=26.
const STIRLING: [Qd; 26] = [
    Qd::new([0.08333333333333333, 4.625929269271485e-18, 2.5679065925163143e-34, 1.425474512049171e-50]),
    Qd::new([-0.002777777777777778, 1.0601087908747154e-19, 3.4773735106991755e-36, 3.2667124234460168e-52]),
    Qd::new([0.0007936507936507937, 6.883823317368282e-22, 5.970764956557651e-40, 5.178813069840099e-58]),
    Qd::new([-0.0005952380952380953, 5.36938218754726e-20, -1.8342189946545105e-36, 1.6545686300570736e-52]),
    Qd::new([0.0008417508417508417, 3.6870174889237694e-20, -6.889900895324708e-37, 3.768418257074434e-53]),
    Qd::new([-0.0019175269175269176, 1.0675702776872475e-19, 6.568342495426554e-37, -2.0311261401341652e-53]),
    Qd::new([0.00641025641025641, 2.2240044563805217e-19, 1.975312763474088e-35, 6.853242846390245e-52]),
    Qd::new([-0.029550653594771242, 4.861760957508855e-19, 1.316681517535326e-35, 2.7181842411133703e-52]),
    Qd::new([0.17964437236883057, -6.401600482710946e-19, 9.779977439678332e-36, -1.6459873421448408e-52]),
    Qd::new([-1.3924322169059011, 1.5837056989230303e-17, 5.2056012685038854e-34, 2.858587930574395e-50]),
    Qd::new([13.402864044168393, -6.154114101993966e-16, 1.3610436598016077e-34, -2.67092015197619e-51]),
    Qd::new([-156.84828462600203, 9.391823141715389e-15, 1.6570392471086158e-31, -4.3781278167020493e-48]),
    Qd::new([2193.1033333333335, -1.3339255626002948e-13, 6.731613057885968e-31, -4.3206702650015194e-47]),
    Qd::new([-36108.77125372499, 5.897583353514365e-13, 7.049709715793733e-31, 3.248966267062169e-47]),
    Qd::new([691472.268851313, 2.5585296305158e-11, -1.2521722821640843e-27, -8.042857178972391e-44]),
    Qd::new([-15238221.539407415, -8.76774522490625e-10, -1.9672353593923997e-26, -1.1987697988365235e-42]),
    Qd::new([382900751.39141417, -2.4082684757733585e-08, -4.344787055834085e-25, 4.2671038618864603e-41]),
    Qd::new([-10882266035.784391, 3.141830930219749e-07, -2.013934646419947e-23, 4.454869877644336e-41]),
    Qd::new([347320283765.00226, -6.048528997747748e-06, 5.341649216919011e-23, 4.871418030434705e-39]),
    Qd::new([-12369602142269.275, 0.0009363732896507286, 3.299942635958079e-20, -2.2283267137789258e-36]),
    Qd::new([488788064793079.3, 0.022575815162518022, 4.800971715392278e-19, 8.204517100444594e-36]),
    Qd::new([-2.1320333960919372e+16, -1.8969750589821368, -3.047406913564973e-17, -2.0306454882458636e-33]),
    Qd::new([1.0217752965257001e+18, -18.434712371946414, -1.7749570310161684e-16, 9.658728380513374e-33]),
    Qd::new([-5.35754721733002e+19, -90.8277091919692, 9.640642309952545e-16, -5.349672583395236e-32]),
    Qd::new([3.0615782637048834e+21, -14332.848948670377, -6.839490150623876e-13, 6.61921135562071e-30]),
    Qd::new([-1.8999917426399204e+23, -1259161.1429306944, 9.979358553254276e-11, 2.6448689505304562e-27]),
];

// ln Γ(x) for x >= 64; the series terms fall below 1e-66 by n = 25.
fn stirling(x: Qd) -> Qd {
    let inv = Qd::ONE / x;
    let inv2 = inv.sqr();
    let mut acc = Qd::ZERO;
    // large x needs far fewer terms
    let cut = 1e-66 * x.0[0];
    let mut used = STIRLING.len();
    let mut p = inv.0[0];
    for (n, c) in STIRLING.iter().enumerate() {
        if (c.0[0] * p).abs() < cut {
            used = n;
            break;
        }
        p *= inv2.0[0];
    }
    // the far tail only needs double-double
    let mut split = used;
    let mut p = inv.0[0];
    for (n, c) in STIRLING[..used].iter().enumerate() {
        if (c.0[0] * p).abs() < 1e-34 * x.0[0] {
            split = n;
            break;
        }
        p *= inv2.0[0];
    }
    let inv2_dd = inv2.to_dd();
    let mut tail = Dd::ZERO;
    for c in STIRLING[split..used].iter().rev() {
        tail = tail * inv2_dd + c.to_dd();
    }
    acc += Qd::from_dd(tail);
    for c in STIRLING[..split].iter().rev() {
        acc = acc * inv2 + *c;
    }
    (x - 0.5) * x.ln() - x + Qd::HALF_LN_2PI + acc * inv
}

impl fmt::Debug for Qd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Qd({:e} + {:e} + {:e} + {:e})", self.0[0], self.0[1], self.0[2], self.0[3])
    }
}

impl PartialOrd for Qd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        (*self - *other).0[0].partial_cmp(&0.0)
    }
}

impl Neg for Qd {
    type Output = Qd;
    fn neg(self) -> Qd {
        Qd(self.0.map(|c| -c))
    }
}

impl Add for Qd {
    type Output = Qd;
    fn add(self, b: Qd) -> Qd {
        let (a, b) = (self.0, b.0);
        renorm([a[0], b[0], a[1], b[1], a[2], b[2], a[3], b[3]])
    }
}

impl Add<f64> for Qd {
    type Output = Qd;
    fn add(self, b: f64) -> Qd {
        let a = self.0;
        renorm([a[0], b, a[1], a[2], a[3]])
    }
}

impl Sub for Qd {
    type Output = Qd;
    fn sub(self, b: Qd) -> Qd {
        self + (-b)
    }
}

impl Sub<f64> for Qd {
    type Output = Qd;
    fn sub(self, b: f64) -> Qd {
        self + (-b)
    }
}

impl Mul for Qd {
    type Output = Qd;
    fn mul(self, b: Qd) -> Qd {
        let (a, b) = (self.0, b.0);
        let (p00, e00) = two_prod(a[0], b[0]);
        let (p01, e01) = two_prod(a[0], b[1]);
        let (p10, e10) = two_prod(a[1], b[0]);
        let (p02, e02) = two_prod(a[0], b[2]);
        let (p11, e11) = two_prod(a[1], b[1]);
        let (p20, e20) = two_prod(a[2], b[0]);
        let o3 = a[0] * b[3] + a[1] * b[2] + a[2] * b[1] + a[3] * b[0];
        let o4 = a[1] * b[3] + a[2] * b[2] + a[3] * b[1];
        renorm([
            p00,
            p01,
            p10,
            e00,
            p02,
            p11,
            p20,
            e01,
            e10,
            o3,
            e02 + e11 + e20 + o4,
        ])
    }
}

impl Mul<f64> for Qd {
    type Output = Qd;
    fn mul(self, b: f64) -> Qd {
        let a = self.0;
        let (p0, e0) = two_prod(a[0], b);
        let (p1, e1) = two_prod(a[1], b);
        let (p2, e2) = two_prod(a[2], b);
        renorm([p0, p1, e0, p2, e1, a[3] * b + e2])
    }
}

impl Div for Qd {
    type Output = Qd;
    fn div(self, b: Qd) -> Qd {
        let mut q = [0.0; 5];
        let mut r = self;
        for qi in q.iter_mut() {
            *qi = r.0[0] / b.0[0];
            r = r - b * *qi;
        }
        renorm(q)
    }
}

impl Div<f64> for Qd {
    type Output = Qd;
    fn div(self, b: f64) -> Qd {
        self / Qd::from_f64(b)
    }
}

impl AddAssign for Qd {
    fn add_assign(&mut self, b: Qd) {
        *self = *self + b;
    }
}
