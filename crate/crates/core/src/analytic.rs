//! Analytic unit-step responses built from Mittag-Leffler derivatives.
//!
//! Open loop, `a2 y^(α) + a1 y^(β) + a0 y = w`:
//!
//! ```text
//! y(t) = 1/a2 Σ_m (-1)^m/m! (a0/a2)^m t^{α(m+1)} E^(m)_{α-β, α+βm+1}(-(a1/a2) t^{α-β})
//! ```
//!
//! Integer PD on the fractional plant, with `A = a0 + K`:
//!
//! ```text
//! y(t) = Σ_m (-1)^m/m! (A/a2)^m Σ_k C(m,k) (a1/A)^k
//!        [ K/a2  t^{α(m+1)-βk}   E^(m)_{α-1, α+m-βk+1}(z)
//!        + Td/a2 t^{α(m+1)-βk-1} E^(m)_{α-1, α+m-βk}(z) ],   z = -(Td/a2) t^{α-1}
//! ```
//!
//! Fractional PD^δ on the fractional plant:
//!
//! ```text
//! y(t) = Σ_m (-1)^m/m! (A/a2)^m Σ_k C(m,k) (Td/A)^k
//!        [ K/a2  t^{α(m+1)-δk}     E^(m)_{α-β, α+βm-δk+1}(z)
//!        + Td/a2 t^{α(m+1)-δ(k+1)} E^(m)_{α-β, α+βm-δ(k+1)+1}(z) ], z = -(a1/a2) t^{α-β}
//! ```
//!
//! Every weight is carried as a logarithm and folded into the Mittag-Leffler
//! kernel, so large powers of `t` and small reciprocal factorials never
//! overflow on their own. The alternating sums still cancel heavily as `t`
//! grows; `SeriesValue::error_estimate` tracks the damage and the
//! double-double mode pushes the usable range of `t` out.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{
    ml_series_cached, Accumulator, LnFactorials, MlArg, MlCoeffs, Qd, Real, Refine, SeriesLimits,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    Working,
    #[serde(alias = "dd")]
    DoubleDouble,
}

impl std::str::FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "working" => Ok(Precision::Working),
            "dd" | "double_double" => Ok(Precision::DoubleDouble),
            _ => Err(Error::Domain(format!("unknown precision '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesBudget {
    /// Truncation of the outer (m) sum.
    pub outer_terms: usize,
    /// Truncation of each Mittag-Leffler series.
    #[serde(default = "default_inner_terms")]
    pub inner_terms: usize,
    pub tol: f64,
    #[serde(default)]
    pub precision: Precision,
}

fn default_inner_terms() -> usize {
    4000
}

impl Default for SeriesBudget {
    fn default() -> Self {
        SeriesBudget::working()
    }
}

impl SeriesBudget {
    pub fn working() -> Self {
        SeriesBudget {
            outer_terms: 400,
            inner_terms: default_inner_terms(),
            tol: 1e-15,
            precision: Precision::Working,
        }
    }

    pub fn double_double() -> Self {
        SeriesBudget {
            outer_terms: 600,
            inner_terms: default_inner_terms(),
            tol: 1e-16,
            precision: Precision::DoubleDouble,
        }
    }

    pub fn with_outer_terms(mut self, n: usize) -> Self {
        self.outer_terms = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer_terms == 0 || self.inner_terms == 0 {
            return Err(Error::Domain("series budgets must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub outer_terms_used: usize,
    /// Both the outer sum and every inner series met their tolerance.
    pub converged: bool,
    /// Largest magnitude of any summed term.
    pub max_term: f64,
    /// Rounding error bound implied by `max_term` and the arithmetic used.
    pub error_estimate: f64,
}

impl SeriesValue {
    fn exact_zero() -> Self {
        SeriesValue {
            value: 0.0,
            outer_terms_used: 0,
            converged: true,
            max_term: 0.0,
            error_estimate: 0.0,
        }
    }

    /// Converged and with estimated rounding error below `abs_tol`.
    pub fn is_reliable(&self, abs_tol: f64) -> bool {
        self.converged && self.error_estimate <= abs_tol && self.value.is_finite()
    }
}

/// Parameters of the reference plant family `a2 y^(α) + a1 y^(β) + a0 y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantCoeffs {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl From<crate::fode::presets::PlantParams> for PlantCoeffs {
    fn from(p: crate::fode::presets::PlantParams) -> Self {
        PlantCoeffs {
            a2: p.a2,
            a1: p.a1,
            a0: p.a0,
            alpha: p.alpha,
            beta: p.beta,
        }
    }
}

// A signed weight kept as (sign, ln|w|).
#[derive(Clone, Copy)]
struct LogWeight<T> {
    sign: f64,
    ln: T,
}

impl<T: Real> LogWeight<T> {
    fn one() -> Self {
        LogWeight {
            sign: 1.0,
            ln: T::zero(),
        }
    }

    fn of(x: T) -> Option<Self> {
        let xf = x.to_f64();
        if xf == 0.0 {
            None
        } else {
            Some(LogWeight {
                sign: xf.signum(),
                ln: x.abs().ln(),
            })
        }
    }

    // w^n, with 0^0 = 1 handled by the caller
    fn pow(self, n: usize) -> Self {
        LogWeight {
            sign: if n % 2 == 1 { self.sign } else { 1.0 },
            ln: self.ln * T::from_f64(n as f64),
        }
    }

    fn mul(self, o: Self) -> Self {
        LogWeight {
            sign: self.sign * o.sign,
            ln: self.ln + o.ln,
        }
    }
}

/// One Mittag-Leffler contribution `weight · t^power · E^(m)_{λ,μ}(z)`.
struct Piece<T: Refine> {
    weight: LogWeight<T>,
    power: T,
    coeffs: MlCoeffs<T>,
}

struct Accum {
    converged: bool,
    max_term: f64,
    error: f64,
}

impl Accum {
    fn record(&mut self, converged: bool, max_term: f64, error: f64) {
        self.converged &= converged;
        self.max_term = self.max_term.max(max_term);
        self.error += error;
    }
}

// Outer m-sum with the stopping rule shared by all three responses.
fn outer_sum<T: Refine>(
    budget: &SeriesBudget,
    abs_tol: f64,
    mut term: impl FnMut(usize, &mut Accum) -> Result<T>,
) -> Result<SeriesValue> {
    let mut sum = T::Acc::default();
    let mut acc = Accum {
        converged: true,
        max_term: 0.0,
        error: 0.0,
    };
    let mut small_run = 0;
    let mut prev = f64::INFINITY;
    let mut outer_converged = false;
    let mut used = 0;
    let mut last = 0.0;
    for m in 0..budget.outer_terms {
        let tm = term(m, &mut acc)?;
        sum.add(tm);
        used = m + 1;
        let mag = tm.abs().to_f64();
        last = mag;
        acc.max_term = acc.max_term.max(mag);
        let total = sum.value().to_f64().abs();
        let shrinking = mag < prev;
        prev = mag;
        if mag <= budget.tol * total || (shrinking && mag < abs_tol) {
            small_run += 1;
            if small_run >= 2 {
                outer_converged = true;
                break;
            }
        } else {
            small_run = 0;
        }
    }
    let value = sum.value().to_f64();
    Ok(SeriesValue {
        value,
        outer_terms_used: used,
        converged: outer_converged && acc.converged,
        max_term: acc.max_term,
        // rounding, plus the last outer term standing in for the tail
        error_estimate: acc.error + acc.max_term * T::EPSILON * used as f64 + last,
    })
}

// Steady-state magnitude, or 1 when there is none.
fn response_scale(gain: f64) -> f64 {
    if gain.is_finite() && gain != 0.0 {
        gain.abs()
    } else {
        1.0
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Series terms whose double-double rounding error would exceed this
/// fraction of the response scale are recomputed in quad-double.
const REFINE_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy)]
enum Loop {
    IntegerPd,
    FractionalPd { delta: f64 },
}

// The parts of a response series that do not depend on t, built once and
// reused for every time it is evaluated at.
struct Series<T: Refine> {
    response: Response,
    p: PlantCoeffs,
    lambda: T,
    // z = -z_coeff t^λ
    z_coeff: T,
    scale: f64,
    facts: LnFactorials<T>,
    // pieces of each outer term, built as the outer sum reaches them
    outer: Vec<Vec<Piece<T>>>,
}

impl<T: Refine> Series<T> {
    fn new(p: &PlantCoeffs, response: Response) -> Self {
        let f = T::from_f64;
        let (alpha, beta, a2) = (f(p.alpha), f(p.beta), f(p.a2));
        let (lambda, z_coeff, scale) = match response {
            Response::Open => (alpha - beta, f(p.a1) / a2, response_scale(1.0 / p.a0)),
            Response::IntegerPd { k, td } => {
                (alpha - f(1.0), f(td) / a2, response_scale(k / (p.a0 + k)))
            }
            Response::FractionalPd { k, .. } => {
                (alpha - beta, f(p.a1) / a2, response_scale(k / (p.a0 + k)))
            }
        };
        Series {
            response,
            p: *p,
            lambda,
            z_coeff,
            scale,
            facts: LnFactorials::new(),
            outer: Vec::new(),
        }
    }

    fn eval(&mut self, t: f64, budget: &SeriesBudget) -> Result<SeriesValue> {
        if t == 0.0 {
            return Ok(SeriesValue::exact_zero());
        }
        let ln_t = T::from_f64(t).ln();
        let arg = MlArg::new(-self.z_coeff * (ln_t * self.lambda).exp());
        let abs_tol = budget.tol * self.scale;
        let limits = SeriesLimits {
            max_terms: budget.inner_terms,
            tol: budget.tol,
            abs_tol,
            refine_tol: REFINE_FRACTION * abs_tol,
        };
        outer_sum::<T>(budget, abs_tol, |m, acc| {
            while self.outer.len() <= m {
                let n = self.outer.len();
                let pieces = self.pieces(n);
                self.outer.push(pieces);
            }
            let mut total = T::Acc::default();
            for piece in &mut self.outer[m] {
                let s = ml_series_cached(
                    &mut piece.coeffs,
                    &mut self.facts,
                    &arg,
                    piece.weight.ln + ln_t * piece.power,
                    piece.weight.sign,
                    &limits,
                )?;
                acc.record(s.converged, s.max_term, s.error_bound);
                total.add(s.value);
            }
            Ok(total.value())
        })
    }

    // (-1)^m / m!
    fn alternating(&mut self, m: usize) -> LogWeight<T> {
        LogWeight {
            sign: if m % 2 == 1 { -1.0 } else { 1.0 },
            ln: -self.facts.high(m),
        }
    }

    fn pieces(&mut self, m: usize) -> Vec<Piece<T>> {
        match self.response {
            Response::Open => self.open_pieces(m),
            Response::IntegerPd { k, td } => self.closed_pieces(m, k, td, Loop::IntegerPd),
            Response::FractionalPd { k, td, delta } => {
                self.closed_pieces(m, k, td, Loop::FractionalPd { delta })
            }
        }
    }

    fn open_pieces(&mut self, m: usize) -> Vec<Piece<T>> {
        let f = T::from_f64;
        let p = self.p;
        let (alpha, beta, one) = (f(p.alpha), f(p.beta), f(1.0));
        let mut w = LogWeight::of(one / f(p.a2)).expect("a2 checked non-zero");
        match LogWeight::of(f(p.a0) / f(p.a2)) {
            Some(r) => w = w.mul(r.pow(m)),
            None if m > 0 => return Vec::new(),
            None => {}
        }
        let mf = f(m as f64);
        vec![Piece {
            weight: w.mul(self.alternating(m)),
            power: alpha * (mf + one),
            coeffs: MlCoeffs::new(self.lambda, alpha + beta * mf + one, m as u32),
        }]
    }

    fn closed_pieces(&mut self, m: usize, k: f64, td: f64, kind: Loop) -> Vec<Piece<T>> {
        let f = T::from_f64;
        let p = self.p;
        let (alpha, beta, one) = (f(p.alpha), f(p.beta), f(1.0));
        let (a2, big_a, td_t) = (f(p.a2), f(p.a0) + f(k), f(td));
        let k_ratio = match kind {
            Loop::IntegerPd => f(p.a1) / big_a,
            Loop::FractionalPd { .. } => td_t / big_a,
        };
        let base = match LogWeight::of(big_a / a2) {
            Some(r) => r.pow(m),
            None if m > 0 => return Vec::new(),
            None => LogWeight::one(),
        };
        let base = base.mul(self.alternating(m));
        let k_ratio = LogWeight::of(k_ratio);
        let parts = [LogWeight::of(f(k) / a2), LogWeight::of(td_t / a2)];
        let mf = f(m as f64);
        let lead = alpha * (mf + one);
        let kmax = if k_ratio.is_some() { m } else { 0 };
        let ln_m_fact = self.facts.high(m);
        let mut out = Vec::with_capacity(2 * (kmax + 1));
        for kk in 0..=kmax {
            let mut wk = base.mul(LogWeight {
                sign: 1.0,
                ln: ln_m_fact - self.facts.high(kk) - self.facts.high(m - kk),
            });
            if let Some(r) = k_ratio {
                wk = wk.mul(r.pow(kk));
            }
            let kf = f(kk as f64);
            // (power of t, μ) for the K and Td contributions
            let shapes = match kind {
                Loop::IntegerPd => {
                    let shift = beta * kf;
                    [
                        (lead - shift, alpha + mf - shift + one),
                        (lead - shift - one, alpha + mf - shift),
                    ]
                }
                Loop::FractionalPd { delta } => {
                    let d = f(delta);
                    let base_mu = alpha + beta * mf + one;
                    [
                        (lead - d * kf, base_mu - d * kf),
                        (lead - d * (kf + one), base_mu - d * (kf + one)),
                    ]
                }
            };
            for (part, (power, mu)) in parts.iter().zip(shapes) {
                let Some(pw) = part else { continue };
                out.push(Piece {
                    weight: wk.mul(*pw),
                    power,
                    coeffs: MlCoeffs::new(self.lambda, mu, m as u32),
                });
            }
        }
        out
    }
}

fn check_response(p: &PlantCoeffs, r: Response, budget: &SeriesBudget) -> Result<()> {
    budget.validate()?;
    if p.a2 == 0.0 {
        return Err(Error::Domain("a2 must be non-zero".into()));
    }
    let need_beta = !matches!(r, Response::IntegerPd { .. });
    if need_beta && !(p.alpha > p.beta && p.beta > 0.0) {
        return Err(Error::Domain(format!(
            "need alpha > beta > 0, got alpha={} beta={}",
            p.alpha, p.beta
        )));
    }
    match r {
        Response::Open => Ok(()),
        Response::IntegerPd { k, td } | Response::FractionalPd { k, td, .. } => {
            if !(k > 0.0) || td == 0.0 || !td.is_finite() {
                return Err(Error::Domain(format!("need K > 0 and Td != 0, got K={k} Td={td}")));
            }
            match r {
                Response::IntegerPd { .. } if !(p.alpha > 1.0) => {
                    Err(Error::Domain(format!("need alpha > 1, got {}", p.alpha)))
                }
                Response::FractionalPd { delta, .. } if !(delta > 0.0 && delta < p.alpha) => {
                    Err(Error::Domain(format!(
                        "need 0 < delta < alpha, got delta={delta} alpha={}",
                        p.alpha
                    )))
                }
                _ => Ok(()),
            }
        }
    }
}

fn run<T: Refine>(
    p: &PlantCoeffs,
    r: Response,
    times: &[f64],
    budget: &SeriesBudget,
) -> Result<Vec<SeriesValue>> {
    let mut series = Series::<T>::new(p, r);
    times.iter().map(|&t| series.eval(t, budget)).collect()
}

fn run_any(
    p: &PlantCoeffs,
    r: Response,
    times: &[f64],
    budget: &SeriesBudget,
) -> Result<Vec<SeriesValue>> {
    match budget.precision {
        Precision::Working => run::<f64>(p, r, times, budget),
        Precision::DoubleDouble => run::<Qd>(p, r, times, budget),
    }
}

/// Open-loop step response of `a2 y^(α) + a1 y^(β) + a0 y = w` at time `t`.
pub fn step_open(p: &PlantCoeffs, t: f64, budget: &SeriesBudget) -> Result<SeriesValue> {
    evaluate(p, Response::Open, t, budget)
}

/// Step response of the fractional plant under the integer PD `K + Td s`.
pub fn step_closed_ipd(
    p: &PlantCoeffs,
    k: f64,
    td: f64,
    t: f64,
    budget: &SeriesBudget,
) -> Result<SeriesValue> {
    evaluate(p, Response::IntegerPd { k, td }, t, budget)
}

/// Step response of the fractional plant under the fractional PD `K + Td s^δ`.
pub fn step_closed_fpd(
    p: &PlantCoeffs,
    k: f64,
    td: f64,
    delta: f64,
    t: f64,
    budget: &SeriesBudget,
) -> Result<SeriesValue> {
    evaluate(p, Response::FractionalPd { k, td, delta }, t, budget)
}

/// Which analytic response to sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Response {
    Open,
    IntegerPd { k: f64, td: f64 },
    FractionalPd { k: f64, td: f64, delta: f64 },
}

pub fn evaluate(p: &PlantCoeffs, r: Response, t: f64, budget: &SeriesBudget) -> Result<SeriesValue> {
    check_response(p, r, budget)?;
    check_time(t)?;
    Ok(run_any(p, r, &[t], budget)?[0])
}

/// Samples a response at many times.
///
/// Coefficients of the series are shared between the times a worker
/// evaluates, so a dense curve costs far less than separate calls.
pub fn curve(
    p: &PlantCoeffs,
    r: Response,
    times: &[f64],
    budget: &SeriesBudget,
) -> Result<Vec<SeriesValue>> {
    check_response(p, r, budget)?;
    for &t in times {
        check_time(t)?;
    }
    // strided shares keep the expensive late times spread over workers
    let workers = rayon::current_num_threads().clamp(1, times.len().max(1));
    let shares: Vec<Vec<f64>> = (0..workers)
        .map(|w| times.iter().skip(w).step_by(workers).copied().collect())
        .collect();
    let done = shares
        .par_iter()
        .map(|ts| run_any(p, r, ts, budget))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        out.push(done[i % workers][i / workers]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fode::presets::REFERENCE;

    #[test]
    fn zero_time_is_exact_zero() {
        let p = PlantCoeffs::from(REFERENCE);
        let b = SeriesBudget::working();
        assert_eq!(step_open(&p, 0.0, &b).unwrap().value, 0.0);
        assert_eq!(step_closed_ipd(&p, 20.5, 2.7343, 0.0, &b).unwrap().value, 0.0);
        assert_eq!(step_closed_fpd(&p, 20.5, 3.7343, 1.15, 0.0, &b).unwrap().value, 0.0);
    }

    #[test]
    fn first_order_collapse() {
        // a1 = 0, α = 1: y = Σ (-1)^m t^{m+1}/Γ(m+2) = 1 - e^{-t}
        let p = PlantCoeffs {
            a2: 1.0,
            a1: 0.0,
            a0: 1.0,
            alpha: 1.0,
            beta: 0.5,
        };
        let v = step_open(&p, 1.0, &SeriesBudget::working()).unwrap();
        assert!(v.converged);
        assert!((v.value - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let p = PlantCoeffs::from(REFERENCE);
        let b = SeriesBudget::working();
        assert!(step_open(&p, -1.0, &b).is_err());
        let bad = PlantCoeffs { beta: 3.0, ..p };
        assert!(step_open(&bad, 1.0, &b).is_err());
        assert!(step_closed_ipd(&p, 0.0, 1.0, 1.0, &b).is_err());
        assert!(step_closed_fpd(&p, 20.5, 1.0, 2.5, 1.0, &b).is_err());
        assert!(step_open(&p, 1.0, &SeriesBudget { tol: 0.0, ..b }).is_err());
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let p = PlantCoeffs::from(REFERENCE);
        let v = step_open(&p, 5.0, &SeriesBudget::working().with_outer_terms(3)).unwrap();
        assert!(!v.converged);
        assert_eq!(v.outer_terms_used, 3);
    }
}

