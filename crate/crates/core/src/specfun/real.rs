//! Scalar abstraction shared by the series kernels so the same code runs in
//! working (f64) and double-double precision.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::dd::Dd;
use super::qd::Qd;
use super::gamma::ln_gamma_signed;

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    /// Running sum used for series accumulation.
    type Acc: Accumulator<Self>;

    /// Relative precision of one rounding.
    const EPSILON: f64;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn abs(self) -> Self;
    /// `(ln|Γ(x)|, sign Γ(x))`; sign is 0 at poles.
    fn ln_gamma(self) -> (Self, f64);

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
}

pub trait Accumulator<T>: Default {
    fn add(&mut self, x: T);
    fn value(&self) -> T;
}

/// Kahan-Babuška-Neumaier running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Accumulator<f64> for Neumaier {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Plain double-double sum; each addition is already error-free to ~1e-32.
#[derive(Debug, Default, Clone, Copy)]
pub struct DdSum(Dd);

impl Accumulator<Dd> for DdSum {
    #[inline]
    fn add(&mut self, x: Dd) {
        self.0 += x;
    }

    #[inline]
    fn value(&self) -> Dd {
        self.0
    }
}

impl Real for f64 {
    type Acc = Neumaier;
    const EPSILON: f64 = f64::EPSILON;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn ln_gamma(self) -> (Self, f64) {
        ln_gamma_signed(self)
    }
}

impl Real for Dd {
    type Acc = DdSum;
    const EPSILON: f64 = 4.93e-32;

    #[inline]
    fn from_f64(x: f64) -> Self {
        Dd::from_f64(x)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        Dd::to_f64(self)
    }
    fn exp(self) -> Self {
        Dd::exp(self)
    }
    fn ln(self) -> Self {
        Dd::ln(self)
    }
    #[inline]
    fn abs(self) -> Self {
        Dd::abs(self)
    }
    fn ln_gamma(self) -> (Self, f64) {
        Dd::ln_gamma(self)
    }
}

/// Running quad-double sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct QdSum(Qd);

impl Accumulator<Qd> for QdSum {
    fn add(&mut self, x: Qd) {
        self.0 += x;
    }

    fn value(&self) -> Qd {
        self.0
    }
}

impl Real for Qd {
    type Acc = QdSum;
    // the squarings in exp cost about twelve bits of the 212
    const EPSILON: f64 = 1e-59;

    fn from_f64(x: f64) -> Self {
        Qd::from_f64(x)
    }
    fn to_f64(self) -> f64 {
        Qd::to_f64(self)
    }
    fn exp(self) -> Self {
        Qd::exp(self)
    }
    fn ln(self) -> Self {
        Qd::ln(self)
    }
    fn abs(self) -> Self {
        Qd::abs(self)
    }
    fn ln_gamma(self) -> (Self, f64) {
        Qd::ln_gamma(self)
    }
}

/// A precision paired with a cheaper one used wherever it suffices.
pub trait Refine: Real {
    type Low: Real;
    fn lower(self) -> Self::Low;
    fn raise(x: Self::Low) -> Self;
    /// Whether `Low` is actually cheaper (and less precise) than `Self`.
    const SPLIT: bool;
}

impl Refine for f64 {
    type Low = f64;
    const SPLIT: bool = false;
    fn lower(self) -> f64 {
        self
    }
    fn raise(x: f64) -> f64 {
        x
    }
}

impl Refine for Dd {
    type Low = Dd;
    const SPLIT: bool = false;
    fn lower(self) -> Dd {
        self
    }
    fn raise(x: Dd) -> Dd {
        x
    }
}

impl Refine for Qd {
    type Low = Dd;
    const SPLIT: bool = true;
    fn lower(self) -> Dd {
        self.to_dd()
    }
    fn raise(x: Dd) -> Qd {
        Qd::from_dd(x)
    }
}
