//! Fractional-order LTI equations and their explicit step-response solver.
//!
//! A model is `Σ a_i y^(α_i) = Σ r_k w^(γ_k)`. Every derivative is replaced
//! by its GL sum, and the `j = 0` weights of the output terms are moved to the
//! left, which gives the explicit recurrence
//!
//! ```text
//! y_m = [ Σ_k r_k h^-γ_k Σ_{j=0}^{N} d_j(γ_k) w_{m-j}
//!       - Σ_i a_i h^-α_i Σ_{j=1}^{N} b_j(α_i) y_{m-j} ]
//!       / Σ_i a_i h^-α_i b_0(α_i)
//! ```
//!
//! No iteration is needed; integer orders fall out as ordinary finite
//! differences because their weights vanish past the order.

pub mod presets;
mod series;

use serde::{Deserialize, Serialize};

pub use series::TimeSeries;

use crate::error::{Error, Result};
use crate::glops::{CoeffCache, MemoryPolicy};

/// Magnitude beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Hard cap on the number of grid steps.
pub const MAX_STEPS: f64 = 1e7;

/// One `coeff · D^order` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracTerm {
    pub coeff: f64,
    pub order: f64,
}

impl FracTerm {
    pub const fn new(coeff: f64, order: f64) -> Self {
        FracTerm { coeff, order }
    }
}

impl From<(f64, f64)> for FracTerm {
    fn from((coeff, order): (f64, f64)) -> Self {
        FracTerm { coeff, order }
    }
}

/// `Σ lhs_i y^(α_i) = Σ rhs_k w^(γ_k)` with `y(0) = y0` and the lowest
/// non-zero-order initial derivative `aux0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fode {
    lhs: Vec<FracTerm>,
    rhs: Vec<FracTerm>,
    pub y0: f64,
    pub aux0: f64,
}

// Merges equal orders and sorts by decreasing order.
fn normalize(terms: &[FracTerm], side: &str) -> Result<Vec<FracTerm>> {
    let mut out: Vec<FracTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        if !t.coeff.is_finite() {
            return Err(Error::InvalidModel(format!("{side} coefficient {} is not finite", t.coeff)));
        }
        if !(t.order >= 0.0) || !t.order.is_finite() {
            return Err(Error::InvalidModel(format!("{side} order {} must be >= 0", t.order)));
        }
        match out.iter_mut().find(|o| o.order == t.order) {
            Some(o) => o.coeff += t.coeff,
            None => out.push(*t),
        }
    }
    out.retain(|t| t.coeff != 0.0);
    if out.is_empty() {
        return Err(Error::InvalidModel(format!("{side} has no non-zero terms")));
    }
    out.sort_by(|a, b| b.order.total_cmp(&a.order));
    Ok(out)
}

impl Fode {
    pub fn new(lhs: &[FracTerm], rhs: &[FracTerm]) -> Result<Self> {
        let lhs = normalize(lhs, "lhs")?;
        let rhs = normalize(rhs, "rhs")?;
        if lhs[0].order <= rhs[0].order {
            return Err(Error::InvalidModel(format!(
                "improper model: highest output order {} must exceed highest input order {}",
                lhs[0].order, rhs[0].order
            )));
        }
        Ok(Fode {
            lhs,
            rhs,
            y0: 0.0,
            aux0: 0.0,
        })
    }

    pub fn with_initial(mut self, y0: f64, aux0: f64) -> Self {
        self.y0 = y0;
        self.aux0 = aux0;
        self
    }

    /// Output-side terms, highest order first.
    pub fn lhs(&self) -> &[FracTerm] {
        &self.lhs
    }

    /// Input-side terms, highest order first.
    pub fn rhs(&self) -> &[FracTerm] {
        &self.rhs
    }

    pub fn lhs_coeff(&self, order: f64) -> Option<f64> {
        self.lhs.iter().find(|t| t.order == order).map(|t| t.coeff)
    }

    pub fn rhs_coeff(&self, order: f64) -> Option<f64> {
        self.rhs.iter().find(|t| t.order == order).map(|t| t.coeff)
    }

    pub fn max_order(&self) -> f64 {
        self.lhs[0].order
    }

    /// Steady-state gain `r_0 / a_0`, or `None` without a zero-order output term.
    pub fn static_gain(&self) -> Option<f64> {
        let a0 = self.lhs_coeff(0.0)?;
        Some(self.rhs_coeff(0.0).unwrap_or(0.0) / a0)
    }

    /// Lowest non-zero output order (the order carrying `aux0`).
    pub fn lowest_dynamic_order(&self) -> Option<FracTerm> {
        self.lhs.iter().rev().find(|t| t.order > 0.0).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// `y_1` from the recurrence itself at `m = 1`.
    #[default]
    Direct,
    /// `y_1` from the initial conditions alone, recurrence from `m = 2`.
    Legacy,
}

impl std::str::FromStr for InitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(InitMode::Direct),
            "legacy" => Ok(InitMode::Legacy),
            _ => Err(Error::InvalidGrid(format!("unknown init mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub h: f64,
    pub t_end: f64,
    #[serde(default)]
    pub policy: MemoryPolicy,
    #[serde(default)]
    pub init_mode: InitMode,
}

impl Grid {
    pub fn new(h: f64, t_end: f64) -> Result<Self> {
        let g = Grid {
            h,
            t_end,
            policy: MemoryPolicy::Full,
            init_mode: InitMode::Direct,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_policy(mut self, policy: MemoryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_init(mut self, mode: InitMode) -> Self {
        self.init_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(Error::InvalidGrid(format!("step h must lie in (0, 1), got {}", self.h)));
        }
        if !self.t_end.is_finite() || self.t_end < self.h * (1.0 - 1e-9) {
            return Err(Error::InvalidGrid(format!(
                "horizon {} must be at least one step {}",
                self.t_end, self.h
            )));
        }
        if self.t_end / self.h > MAX_STEPS {
            return Err(Error::InvalidGrid(format!(
                "horizon/step ratio {} exceeds {MAX_STEPS}",
                self.t_end / self.h
            )));
        }
        self.policy.validate()
    }

    /// Index of the last grid point, `⌊t_end/h⌋`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.h + 1e-9).floor() as usize
    }

    /// Number of samples including `t = 0`.
    pub fn len(&self) -> usize {
        self.steps() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid with the same horizon and policy but step `h / 2`.
    pub fn halved(&self) -> Grid {
        Grid {
            h: self.h / 2.0,
            ..*self
        }
    }
}

/// Unit step on the grid: `w_0 = 0`, `w_m = 1` for `m >= 1`.
pub fn unit_step(grid: &Grid) -> TimeSeries {
    let mut samples = vec![1.0; grid.len()];
    samples[0] = 0.0;
    TimeSeries {
        h: grid.h,
        t0: 0.0,
        samples,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub step: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    /// Output samples; truncated before the first divergent step.
    pub y: TimeSeries,
    pub divergence: Option<Divergence>,
}

impl StepResponse {
    pub fn is_diverged(&self) -> bool {
        self.divergence.is_some()
    }

    /// Converts a divergence signal into an error.
    pub fn into_result(self) -> Result<TimeSeries> {
        match self.divergence {
            Some(d) => Err(Error::Diverged { step: d.step, t: d.t }),
            None => Ok(self.y),
        }
    }
}

/// `y_1` from the initial conditions,
/// `(aux0 - y0 c_1 h^-β) / (c_0 h^-β)` with `c_j` the weights of the lowest
/// non-zero output order β.
pub fn y1_legacy(model: &Fode, grid: &Grid) -> Result<f64> {
    let beta = model
        .lowest_dynamic_order()
        .ok_or_else(|| Error::InvalidModel("no non-zero output order for legacy start".into()))?
        .order;
    let c = CoeffCache::global().get(beta, 2);
    let s = grid.h.powf(-beta);
    Ok((model.aux0 - model.y0 * c[1] * s) / (c[0] * s))
}

struct Stencil {
    scale: f64,
    weights: std::sync::Arc<Vec<f64>>,
    // last usable history index
    support: usize,
}

fn stencils(terms: &[FracTerm], grid: &Grid, n: usize) -> Result<Vec<Stencil>> {
    let cache = CoeffCache::global();
    terms
        .iter()
        .map(|t| {
            let cap = grid.policy.window(t.order, grid.h)?;
            let support = if t.order == t.order.floor() {
                cap.min(t.order as usize)
            } else {
                cap
            };
            let len = support.min(n.saturating_sub(1)) + 1;
            Ok(Stencil {
                scale: t.coeff * grid.h.powf(-t.order),
                weights: cache.get(t.order, len),
                support,
            })
        })
        .collect()
}

/// Unit-step response of `model` on `grid`.
pub fn solve_step(model: &Fode, grid: &Grid) -> Result<StepResponse> {
    grid.validate()?;
    let w = unit_step(grid);
    solve_with_input(model, grid, &w)
}

/// Response of `model` to an arbitrary input sampled on `grid`.
pub fn solve_with_input(model: &Fode, grid: &Grid, w: &TimeSeries) -> Result<StepResponse> {
    grid.validate()?;
    let n = grid.len();
    if w.len() < n {
        return Err(Error::GridMismatch(format!(
            "input has {} samples, grid needs {n}",
            w.len()
        )));
    }
    let lhs = stencils(model.lhs(), grid, n)?;
    let rhs = stencils(model.rhs(), grid, n)?;

    let denom: f64 = lhs.iter().map(|s| s.scale * s.weights[0]).sum();
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::DegenerateDenominator(denom));
    }

    let mut y = Vec::with_capacity(n);
    y.push(model.y0);
    let ws = &w.samples;
    let mut start = 1;
    if grid.init_mode == InitMode::Legacy && n > 1 {
        y.push(y1_legacy(model, grid)?);
        start = 2;
    }

    for m in start..n {
        let mut num = 0.0;
        for s in &rhs {
            let window = m.min(s.support);
            let mut acc = 0.0;
            for j in 0..=window {
                acc += s.weights[j] * ws[m - j];
            }
            num += s.scale * acc;
        }
        for s in &lhs {
            let window = m.min(s.support);
            let mut acc = 0.0;
            for j in 1..=window {
                acc += s.weights[j] * y[m - j];
            }
            num -= s.scale * acc;
        }
        let ym = num / denom;
        if !ym.is_finite() || ym.abs() > DIVERGENCE_LIMIT {
            return Ok(StepResponse {
                y: TimeSeries {
                    h: grid.h,
                    t0: 0.0,
                    samples: y,
                },
                divergence: Some(Divergence {
                    step: m,
                    t: m as f64 * grid.h,
                }),
            });
        }
        y.push(ym);
    }
    Ok(StepResponse {
        y: TimeSeries {
            h: grid.h,
            t0: 0.0,
            samples: y,
        },
        divergence: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_order() -> Fode {
        Fode::new(&[FracTerm::new(1.0, 1.0), FracTerm::new(1.0, 0.0)], &[FracTerm::new(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn unit_step_shapes() {
        let g = Grid::new(0.1, 0.3).unwrap();
        assert_eq!(unit_step(&g).samples, vec![0.0, 1.0, 1.0, 1.0]);
        let g = Grid::new(0.5, 0.5).unwrap();
        assert_eq!(unit_step(&g).samples, vec![0.0, 1.0]);
        assert_eq!(unit_step(&Grid::new(0.1, 1.0).unwrap()).len(), 11);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(-0.1, 1.0).is_err());
        assert!(Grid::new(1.5, 10.0).is_err());
        assert!(Grid::new(0.1, 0.05).is_err());
        assert!(Grid::new(1e-8, 1.0).is_err());
    }

    #[test]
    fn model_merges_and_validates() {
        let m = Fode::new(
            &[(1.0, 1.0).into(), (2.0, 0.0).into(), (0.5, 1.0).into()],
            &[(1.0, 0.0).into()],
        )
        .unwrap();
        assert_eq!(m.lhs(), &[FracTerm::new(1.5, 1.0), FracTerm::new(2.0, 0.0)]);
        assert_eq!(m.static_gain(), Some(0.5));
        assert!(Fode::new(&[(1.0, 1.0).into()], &[(1.0, 1.0).into()]).is_err());
        assert!(Fode::new(&[], &[(1.0, 0.0).into()]).is_err());
        assert!(Fode::new(&[(1.0, -1.0).into()], &[(1.0, 0.0).into()]).is_err());
        assert!(Fode::new(&[(f64::NAN, 1.0).into()], &[(1.0, 0.0).into()]).is_err());
    }

    #[test]
    fn first_order_lag() {
        let g = Grid::new(0.001, 1.0).unwrap();
        let y = solve_step(&first_order(), &g).unwrap().into_result().unwrap();
        assert!((y.last().unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-3);
    }

    #[test]
    fn reference_plant_first_step() {
        let g = Grid::new(0.1, 1.0).unwrap();
        let y = solve_step(&presets::reference_plant(), &g).unwrap().y;
        let expect = 1.0 / (0.8 * 10f64.powf(2.2) + 0.5 * 10f64.powf(0.9) + 1.0);
        assert!((y.samples[1] - expect).abs() < 1e-12);
        assert!((y.samples[1] - 0.007589).abs() < 1e-6);
    }

    #[test]
    fn legacy_start_values() {
        let g = Grid::new(0.1, 1.0).unwrap();
        let plant = presets::reference_plant();
        assert_eq!(y1_legacy(&plant, &g).unwrap(), 0.0);
        let p = plant.clone().with_initial(0.1, 0.0);
        assert!((y1_legacy(&p, &g).unwrap() - 0.09).abs() < 1e-15);
        let p = plant.with_initial(0.0, 1.0);
        assert!((y1_legacy(&p, &g).unwrap() - 0.12589).abs() < 1e-5);
        let y = solve_step(&presets::reference_plant(), &g.with_init(InitMode::Legacy)).unwrap().y;
        assert_eq!(y.samples[1], 0.0);
    }

    #[test]
    fn divergence_truncates() {
        // y' - y = w grows like e^t
        let m = Fode::new(&[(1.0, 1.0).into(), (-1.0, 0.0).into()], &[(1.0, 0.0).into()]).unwrap();
        let g = Grid::new(0.01, 60.0).unwrap();
        let r = solve_step(&m, &g).unwrap();
        let d = r.divergence.expect("diverges");
        assert_eq!(r.y.len(), d.step);
        assert!(r.y.max_abs() <= DIVERGENCE_LIMIT);
        assert!(matches!(r.into_result(), Err(Error::Diverged { .. })));
    }

    #[test]
    fn degenerate_denominator() {
        // a y' + b y with a/h + b = 0
        let m = Fode::new(&[(0.1, 1.0).into(), (-1.0, 0.0).into()], &[(1.0, 0.0).into()]).unwrap();
        let g = Grid::new(0.1, 1.0).unwrap();
        assert!(matches!(solve_step(&m, &g), Err(Error::DegenerateDenominator(_))));
    }
}
