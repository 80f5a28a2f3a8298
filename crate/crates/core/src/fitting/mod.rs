//! Least-squares integer second-order surrogates of a measured step
//! response, `Σ_j (y^f_j - y^i_j)^2 → min`, minimized by Nelder-Mead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fode::presets::integer_second_order;
use crate::fode::{solve_step, Grid, TimeSeries};

/// Step response of `a2 y'' + a1 y' + a0 y = u` on `grid`.
pub fn simulate_candidate(a2: f64, a1: f64, a0: f64, grid: &Grid) -> Result<TimeSeries> {
    if !(a2 > 0.0) || !(a0 > 0.0) || !a1.is_finite() {
        return Err(Error::Domain(format!(
            "candidate needs a2 > 0, a0 > 0 and finite a1, got ({a2}, {a1}, {a0})"
        )));
    }
    let model = integer_second_order(a2, a1, a0)?;
    solve_step(&model, grid)?.into_result()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMead {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

// reflection, expansion, contraction, shrink
const RHO: f64 = 1.0;
const CHI: f64 = 2.0;
const GAMMA: f64 = 0.5;
const SIGMA: f64 = 0.5;

/// Minimizes `f` from `init` by the downhill simplex method.
///
/// Non-finite objective values count as `+inf`, so infeasible regions are
/// simply avoided. Converged once the objective spread over the simplex
/// drops below `ftol` (relative once the objective exceeds 1) and its relative width below `sqrt(ftol)`; otherwise the best point after `max_iters` is
/// returned with `converged = false`.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    init: &[f64],
    ftol: f64,
    max_iters: usize,
) -> Result<NelderMead> {
    let n = init.len();
    if n == 0 {
        return Err(Error::Domain("nelder_mead needs at least one parameter".into()));
    }
    if !(ftol > 0.0) {
        return Err(Error::Domain(format!("ftol must be > 0, got {ftol}")));
    }
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    // a symmetric simplex can have zero spread far from the minimum
    let xtol = ftol.sqrt();
    let f0 = eval(init);
    if !f0.is_finite() {
        return Err(Error::Domain("objective is not finite at the initial point".into()));
    }

    // initial simplex: 5% steps, or a small absolute one at zero
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(init.to_vec(), f0)];
    for i in 0..n {
        let mut x = init.to_vec();
        x[i] = if x[i] != 0.0 { x[i] * 1.05 } else { 2.5e-4 };
        let v = eval(&x);
        simplex.push((x, v));
    }

    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    let along = |c: &[f64], x: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(x).map(|(ci, xi)| ci + t * (xi - ci)).collect()
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        order(&mut simplex);
        let x0 = &simplex[0].0;
        let width = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(x0).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)))
            .fold(0.0, f64::max);
        let flat = simplex[n].1 - simplex[0].1 < ftol * simplex[0].1.abs().max(1.0);
        // a collapsed simplex cannot resolve objective noise any further
        if (flat && width <= xtol) || width <= 4.0 * f64::EPSILON {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let (worst, f_worst) = simplex[n].clone();
        let xr = along(&centroid, &worst, -RHO);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(&centroid, &worst, -RHO * CHI);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        // contract towards the better of the worst point and its reflection
        let (xc, fc) = if fr < f_worst {
            let xc = along(&centroid, &worst, -RHO * GAMMA);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(&centroid, &worst, GAMMA);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(f_worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            *x = along(&best, x, SIGMA);
            *v = eval(x);
        }
    }
    order(&mut simplex);
    let (x, value) = simplex.swap_remove(0);
    Ok(NelderMead {
        x,
        value,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    A2,
    A1,
    A0,
}

impl FitParam {
    fn index(self) -> usize {
        match self {
            FitParam::A2 => 0,
            FitParam::A1 => 1,
            FitParam::A0 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    /// Reference response `y^f`, sampled on `grid`.
    pub target: TimeSeries,
    pub grid: Grid,
    pub free: Vec<FitParam>,
    /// Starting `(a2, a1, a0)`; parameters not in `free` stay here.
    pub init: [f64; 3],
    pub max_iters: usize,
    pub ftol: f64,
}

impl FitSpec {
    /// Fits `a2` and `a1` with `a0 = 1`, from `(1, 1, 1)`.
    pub fn new(target: TimeSeries, grid: Grid) -> Self {
        FitSpec {
            target,
            grid,
            free: vec![FitParam::A2, FitParam::A1],
            init: [1.0, 1.0, 1.0],
            max_iters: 2000,
            ftol: 1e-14,
        }
    }

    pub fn with_init(mut self, init: [f64; 3]) -> Self {
        self.init = init;
        self
    }

    pub fn with_free(mut self, free: &[FitParam]) -> Self {
        self.free = free.to_vec();
        self
    }

    fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.target.len() != self.grid.len() || (self.target.h - self.grid.h).abs() > 1e-12 * self.grid.h {
            return Err(Error::GridMismatch(format!(
                "target has {} samples at h={}, grid has {} at h={}",
                self.target.len(),
                self.target.h,
                self.grid.len(),
                self.grid.h
            )));
        }
        if self.target.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateTarget("target has non-finite samples".into()));
        }
        if self.target.samples.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateTarget("target is identically zero".into()));
        }
        if !(self.init[0] > 0.0) || !(self.init[2] > 0.0) || !self.init[1].is_finite() {
            return Err(Error::Domain(format!("init needs a2 > 0 and a0 > 0, got {:?}", self.init)));
        }
        if self.max_iters == 0 || !(self.ftol > 0.0) {
            return Err(Error::Domain("max_iters and ftol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Sum of squared differences between the target and candidate responses;
/// infinite for infeasible or divergent candidates.
pub fn fit_objective(target: &TimeSeries, grid: &Grid, a: [f64; 3]) -> f64 {
    match simulate_candidate(a[0], a[1], a[2], grid) {
        Ok(y) => target
            .samples
            .iter()
            .zip(&y.samples)
            .map(|(f, i)| (f - i) * (f - i))
            .sum(),
        Err(_) => f64::INFINITY,
    }
}

/// Fits `a2 y'' + a1 y' + a0 y = u` to `spec.target` over the free parameters.
pub fn fit_integer_second_order(spec: &FitSpec) -> Result<FitResult> {
    spec.validate()?;
    let mut free: Vec<usize> = spec.free.iter().map(|p| p.index()).collect();
    free.sort_unstable();
    free.dedup();
    let full = |x: &[f64]| {
        let mut a = spec.init;
        for (&i, &v) in free.iter().zip(x) {
            a[i] = v;
        }
        a
    };
    let objective = |a: [f64; 3]| fit_objective(&spec.target, &spec.grid, a);

    if free.is_empty() {
        let v = objective(spec.init);
        return Ok(FitResult {
            a2: spec.init[0],
            a1: spec.init[1],
            a0: spec.init[2],
            objective: v,
            iterations: 0,
            converged: v.is_finite(),
        });
    }
    let start: Vec<f64> = free.iter().map(|&i| spec.init[i]).collect();
    let nm = nelder_mead(|x| objective(full(x)), &start, spec.ftol, spec.max_iters)?;
    let a = full(&nm.x);
    Ok(FitResult {
        a2: a[0],
        a1: a[1],
        a0: a[2],
        objective: objective(a),
        iterations: nm.iterations,
        converged: nm.converged,
    })
}

/// Grid on which a fit of the reference plant reproduces the published
/// surrogate; a coarser h = 0.1 lands about 12% off in `a1`.
pub fn default_fit_grid() -> Grid {
    Grid::new(0.01, 10.0).expect("static grid is valid")
}
