//! Two-parameter Mittag-Leffler function and its integer-order derivatives,
//!
//! ```text
//! E^(k)_{λ,μ}(z) = Σ_j (j+k)! z^j / (j! Γ(λj + λk + μ))
//! ```
//!
//! Terms are formed in log space (factorial ratio, power and Gamma together)
//! so arguments of Γ far beyond the f64 range of Γ itself stay usable, and
//! are accumulated with a compensated sum.

use super::real::{Accumulator, Real, Refine};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_TERMS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-15;

/// Largest log-magnitude a term may have before it is reported as overflow.
const LN_MAX: f64 = 709.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlQuery {
    pub lambda: f64,
    pub mu: f64,
    /// Derivative order.
    pub k: u32,
    pub z: f64,
    pub max_terms: usize,
    pub tol: f64,
}

impl MlQuery {
    pub fn new(lambda: f64, mu: f64, k: u32, z: f64) -> Self {
        MlQuery {
            lambda,
            mu,
            k,
            z,
            max_terms: DEFAULT_MAX_TERMS,
            tol: DEFAULT_TOL,
        }
    }

    pub fn with_max_terms(mut self, n: usize) -> Self {
        self.max_terms = n;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !self.mu.is_finite() || !self.z.is_finite() {
            return Err(Error::Domain("mu and z must be finite".into()));
        }
        if self.max_terms == 0 {
            return Err(Error::Domain("max_terms must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlValue {
    pub value: f64,
    pub terms_used: usize,
    pub converged: bool,
}

/// Result of a series summation in precision `T`.
#[derive(Debug, Clone, Copy)]
pub struct SeriesSum<T> {
    pub value: T,
    pub terms_used: usize,
    pub converged: bool,
    /// Largest |term| seen, a measure of cancellation.
    pub max_term: f64,
    /// Accumulated rounding error bound of the terms.
    pub error_bound: f64,
}

/// Evaluates `E^(k)_{λ,μ}(z)` at working precision.
pub fn mittag_leffler(q: &MlQuery) -> Result<MlValue> {
    q.validate()?;
    let s = ml_series::<f64>(q.lambda, q.mu, q.k, q.z, 0.0, 1.0, q.max_terms, q.tol, 0.0)?;
    Ok(MlValue {
        value: s.value,
        terms_used: s.terms_used,
        converged: s.converged,
    })
}

/// Same series accumulated and formed in double-double precision.
pub fn mittag_leffler_dd(q: &MlQuery) -> Result<MlValue> {
    q.validate()?;
    let z = super::dd::Dd::from_f64(q.z);
    let (lam, mu) = (super::dd::Dd::from_f64(q.lambda), super::dd::Dd::from_f64(q.mu));
    let s = ml_series(lam, mu, q.k, z, super::dd::Dd::ZERO, 1.0, q.max_terms, q.tol, 0.0)?;
    Ok(MlValue {
        value: s.value.to_f64(),
        terms_used: s.terms_used,
        converged: s.converged,
    })
}

/// Computes `sign · e^{log_scale} · E^(k)_{λ,μ}(z)`.
///
/// The prefactor is folded into every term's logarithm so callers can pass
/// weights (large powers of `t`, reciprocal factorials) that would overflow
/// or underflow on their own. Summation stops after two consecutive terms
/// below `tol` relative to the sum, or below `abs_tol` while shrinking.
/// A positive `abs_tol` also caps the relative threshold, so a large partial
/// sum that later cancels against others is still resolved to `abs_tol`.
#[allow(clippy::too_many_arguments)]
pub fn ml_series<T: Refine>(
    lambda: T,
    mu: T,
    k: u32,
    z: T,
    log_scale: T,
    sign: f64,
    max_terms: usize,
    tol: f64,
    abs_tol: f64,
) -> Result<SeriesSum<T>> {
    let mut coeffs = MlCoeffs::new(lambda, mu, k);
    let mut facts = LnFactorials::new();
    let limits = SeriesLimits {
        max_terms,
        tol,
        abs_tol,
        refine_tol: f64::INFINITY,
    };
    ml_series_cached(&mut coeffs, &mut facts, &MlArg::new(z), log_scale, sign, &limits)
}

/// ln n! in both precisions of `T`, grown on demand.
///
/// The running sums are compensated: a plain f64 sum of a few hundred
/// logarithms loses enough digits to show up in cancelling series.
pub struct LnFactorials<T: Refine> {
    low: Vec<T::Low>,
    low_sum: <T::Low as Real>::Acc,
    high: Vec<T>,
    high_sum: T::Acc,
}

impl<T: Refine> Default for LnFactorials<T> {
    fn default() -> Self {
        LnFactorials {
            low: vec![T::Low::zero()],
            low_sum: Default::default(),
            high: vec![T::zero()],
            high_sum: Default::default(),
        }
    }
}

impl<T: Refine> LnFactorials<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn low(&mut self, n: usize) -> T::Low {
        while self.low.len() <= n {
            let i = self.low.len();
            self.low_sum.add(T::Low::from_f64(i as f64).ln());
            self.low.push(self.low_sum.value());
        }
        self.low[n]
    }

    pub fn high(&mut self, n: usize) -> T {
        while self.high.len() <= n {
            let i = self.high.len();
            self.high_sum.add(T::from_f64(i as f64).ln());
            self.high.push(self.high_sum.value());
        }
        self.high[n]
    }
}

/// Argument of a series with its logarithm prepared in every precision.
pub struct MlArg<T: Refine> {
    abs: T,
    neg: bool,
    zero: bool,
    ln_abs: T,
    ln_abs_low: <T as Refine>::Low,
    ln_abs_f: f64,
}

impl<T: Refine> MlArg<T> {
    pub fn new(z: T) -> Self {
        let zf = z.to_f64();
        let ln_abs_low = if zf == 0.0 {
            T::Low::zero()
        } else {
            z.lower().abs().ln()
        };
        MlArg {
            abs: z.abs(),
            neg: zf < 0.0,
            zero: zf == 0.0,
            ln_abs: if T::SPLIT && zf != 0.0 { z.abs().ln() } else { T::raise(ln_abs_low) },
            ln_abs_low,
            ln_abs_f: ln_abs_low.to_f64(),
        }
    }
}

/// Truncation and accuracy targets of one summation.
#[derive(Debug, Clone, Copy)]
pub struct SeriesLimits {
    pub max_terms: usize,
    pub tol: f64,
    pub abs_tol: f64,
    /// Rounding error per term above which it is recomputed in full precision.
    pub refine_tol: f64,
}

#[derive(Clone, Copy)]
struct Level<L> {
    ln: L,
    sign: f64,
    // magnitude of the logarithms that were combined, for error bounds
    size: f64,
}

struct Entry<T: Refine> {
    f: Option<Level<f64>>,
    low: Option<Level<T::Low>>,
    high: Option<T>,
    // |c_j / c_{j-1}|
    step: Option<T>,
}

impl<T: Refine> Default for Entry<T> {
    fn default() -> Self {
        Entry {
            f: None,
            low: None,
            high: None,
            step: None,
        }
    }
}

/// Coefficients `c_j = (j+k)!/(j! Γ(λj + λk + μ))` of one series.
///
/// They do not depend on `z`, so one set serves every argument the series
/// is summed at. Each precision is filled in only for the terms that need it.
pub struct MlCoeffs<T: Refine> {
    lambda: T,
    mu: T,
    base: T,
    k: u32,
    entries: Vec<Entry<T>>,
}

impl<T: Refine> MlCoeffs<T> {
    pub fn new(lambda: T, mu: T, k: u32) -> Self {
        MlCoeffs {
            lambda,
            mu,
            base: lambda * T::from_f64(k as f64) + mu,
            k,
            entries: Vec::new(),
        }
    }

    fn entry(&mut self, j: usize) -> &mut Entry<T> {
        if self.entries.len() <= j {
            self.entries.resize_with(j + 1, Entry::default);
        }
        &mut self.entries[j]
    }

    fn x_low(&self, j: usize) -> T::Low {
        self.lambda.lower() * T::Low::from_f64(j as f64) + self.base.lower()
    }

    fn f(&mut self, j: usize, facts: &mut LnFactorials<T>) -> Level<f64> {
        if let Some(l) = self.entry(j).f {
            return l;
        }
        let (lg, sign) = super::gamma::ln_gamma_signed(self.x_low(j).to_f64());
        let (a, b) = (facts.low(j + self.k as usize).to_f64(), facts.low(j).to_f64());
        let l = Level {
            ln: a - b - lg,
            sign,
            size: a + b + lg.abs() + 1.0,
        };
        self.entry(j).f = Some(l);
        l
    }

    fn low(&mut self, j: usize, facts: &mut LnFactorials<T>) -> Level<T::Low> {
        if let Some(l) = self.entry(j).low {
            return l;
        }
        let (lg, sign) = self.x_low(j).ln_gamma();
        let (a, b) = (facts.low(j + self.k as usize), facts.low(j));
        let l = Level {
            ln: a - b - lg,
            sign,
            size: a.to_f64() + b.to_f64() + lg.to_f64().abs() + 1.0,
        };
        self.entry(j).low = Some(l);
        l
    }

    fn high(&mut self, j: usize, facts: &mut LnFactorials<T>) -> T {
        if let Some(h) = self.entry(j).high {
            return h;
        }
        let x = self.lambda * T::from_f64(j as f64) + self.base;
        let h = facts.high(j + self.k as usize) - facts.high(j) - x.ln_gamma().0;
        self.entry(j).high = Some(h);
        h
    }

    fn step(&mut self, j: usize, facts: &mut LnFactorials<T>) -> T {
        if let Some(s) = self.entry(j).step {
            return s;
        }
        let s = (self.high(j, facts) - self.high(j - 1, facts)).exp();
        self.entry(j).step = Some(s);
        s
    }
}

/// Sums `sign · e^{log_scale} · Σ_j c_j z^j` over cached coefficients.
///
/// Each term is first formed in f64, then in the companion precision of `T`,
/// and only in `T` itself when its rounding error would exceed
/// `limits.refine_tol`. Consecutive full-precision terms are chained through
/// the coefficient ratios instead of being exponentiated afresh.
pub fn ml_series_cached<T: Refine>(
    coeffs: &mut MlCoeffs<T>,
    facts: &mut LnFactorials<T>,
    arg: &MlArg<T>,
    log_scale: T,
    sign: f64,
    limits: &SeriesLimits,
) -> Result<SeriesSum<T>> {
    type Low<T> = <T as Refine>::Low;
    let refine = T::SPLIT && limits.refine_tol.is_finite();
    let log_scale_low = log_scale.lower();
    let log_scale_f = log_scale_low.to_f64();

    let mut acc = <Low<T> as Real>::Acc::default();
    let mut acc_exact = T::Acc::default();
    let mut max_term = 0.0f64;
    let mut error_bound = 0.0f64;
    let mut stop = StopRule {
        small_run: 0,
        prev: f64::INFINITY,
    };
    // last full-precision term, for chaining
    let mut chain: Option<(usize, T)> = None;
    let finish = |acc: &<Low<T> as Real>::Acc,
                  acc_exact: &T::Acc,
                  terms_used: usize,
                  converged: bool,
                  max_term: f64,
                  error_bound: f64| SeriesSum {
        value: T::raise(acc.value()) + acc_exact.value(),
        terms_used,
        converged,
        max_term,
        error_bound,
    };

    for j in 0..limits.max_terms {
        if j > 0 && arg.zero {
            return Ok(finish(&acc, &acc_exact, j, true, max_term, error_bound));
        }
        let cf = coeffs.f(j, facts);
        if cf.sign == 0.0 {
            // 1/Γ vanishes at the poles
            continue;
        }
        let ln_pow_f = arg.ln_abs_f * j as f64;
        let ln_mag_f = log_scale_f + cf.ln + ln_pow_f;
        if ln_mag_f > LN_MAX {
            return Err(Error::Overflow(format!(
                "Mittag-Leffler term {j} (lambda={:?}, mu={:?}, k={}) exceeds f64 range",
                coeffs.lambda.to_f64(),
                coeffs.mu.to_f64(),
                coeffs.k
            )));
        }
        let alternate = if arg.neg && j % 2 == 1 { -1.0 } else { 1.0 };
        let log_size = log_scale_f.abs() + cf.size + ln_pow_f.abs();
        let mut m = ln_mag_f.exp();
        let s = sign * alternate;

        if refine && m * f64::EPSILON * 16.0 * log_size <= limits.refine_tol {
            acc.add(Low::<T>::from_f64(s * cf.sign * m));
            error_bound += m * f64::EPSILON * 16.0 * log_size;
        } else {
            let cl = coeffs.low(j, facts);
            let ln_mag = log_scale_low + cl.ln + arg.ln_abs_low * Low::<T>::from_f64(j as f64);
            let mag = ln_mag.exp();
            m = mag.to_f64();
            let err = m * <Low<T> as Real>::EPSILON * 4.0 * (log_size + j as f64);
            let s = s * cl.sign;
            if refine && err > limits.refine_tol {
                let term = match chain {
                    Some((prev, t)) if prev + 1 == j => t * arg.abs * coeffs.step(j, facts),
                    _ => (log_scale + coeffs.high(j, facts) + arg.ln_abs * T::from_f64(j as f64))
                        .exp(),
                };
                chain = Some((j, term));
                acc_exact.add(if s < 0.0 { -term } else { term });
                error_bound += m * T::EPSILON * 4.0 * (log_size + j as f64);
            } else {
                acc.add(if s < 0.0 { -mag } else { mag });
                error_bound += err;
            }
        }
        max_term = max_term.max(m);

        let total = (acc.value().to_f64() + acc_exact.value().to_f64()).abs();
        if stop.check(m, total, limits.tol, limits.abs_tol, j) {
            return Ok(finish(&acc, &acc_exact, j + 1, true, max_term, error_bound));
        }
    }
    Ok(finish(&acc, &acc_exact, limits.max_terms, false, max_term, error_bound))
}

// Two consecutive small terms end a series.
struct StopRule {
    small_run: u32,
    prev: f64,
}

impl StopRule {
    fn check(&mut self, m: f64, total: f64, tol: f64, abs_tol: f64, j: usize) -> bool {
        let shrinking = m < self.prev;
        self.prev = m;
        let rel = if abs_tol > 0.0 { (tol * total).min(abs_tol) } else { tol * total };
        if m < rel || (shrinking && m < abs_tol) || (m == 0.0 && total == 0.0 && j > 0) {
            self.small_run += 1;
        } else {
            self.small_run = 0;
        }
        self.small_run >= 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gamma::gamma;

    #[test]
    fn exponential_special_case() {
        let v = mittag_leffler(&MlQuery::new(1.0, 1.0, 0, 1.0)).unwrap();
        assert!((v.value - std::f64::consts::E).abs() < 1e-14);
        assert!(v.converged);
    }

    #[test]
    fn zero_argument_keeps_only_first_term() {
        let v = mittag_leffler(&MlQuery::new(0.7, 1.3, 2, 0.0)).unwrap();
        let expect = 2.0 / gamma(2.7).unwrap();
        assert!((v.value - expect).abs() < 1e-15 * expect);
        assert_eq!(v.terms_used, 1);
    }

    #[test]
    fn hyperbolic_cosine() {
        let v = mittag_leffler(&MlQuery::new(2.0, 1.0, 0, 1.0)).unwrap();
        assert!((v.value - 1f64.cosh()).abs() < 1e-14);
    }

    #[test]
    fn truncation_is_flagged() {
        let v = mittag_leffler(&MlQuery::new(1.0, 1.0, 0, 30.0).with_max_terms(10)).unwrap();
        assert!(!v.converged);
        assert_eq!(v.terms_used, 10);
    }

    #[test]
    fn invalid_queries_rejected() {
        assert!(mittag_leffler(&MlQuery::new(0.0, 1.0, 0, 1.0)).is_err());
        assert!(mittag_leffler(&MlQuery::new(1.0, 1.0, 0, 1.0).with_max_terms(0)).is_err());
        assert!(mittag_leffler(&MlQuery::new(1.0, 1.0, 0, 1.0).with_tol(0.0)).is_err());
    }

    #[test]
    fn pole_arguments_contribute_nothing() {
        // μ = -1: the j=0 term has Γ(-1) and is dropped; E_{1,-1}(z) = z^2 e^z
        let z = 0.5f64;
        let v = mittag_leffler(&MlQuery::new(1.0, -1.0, 0, z)).unwrap();
        assert!((v.value - z * z * z.exp()).abs() < 1e-14);
    }

    #[test]
    fn huge_terms_overflow() {
        let q = MlQuery::new(0.1, 1.0, 0, 1e30);
        assert!(matches!(mittag_leffler(&q), Err(Error::Overflow(_))));
    }
}
