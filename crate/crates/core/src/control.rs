//! PD and PD^δ regulators: pole-placement design, unity-feedback loops,
//! quality metrics and a time-domain stability probe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fode::{solve_step, unit_step, Fode, FracTerm, Grid, StepResponse, TimeSeries};

/// `K + Td·D^δ`; `delta = 1` is the classical PD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdController {
    pub k: f64,
    pub td: f64,
    pub delta: f64,
}

impl PdController {
    pub fn integer(k: f64, td: f64) -> Self {
        PdController { k, td, delta: 1.0 }
    }
}

/// Places the dominant pair at `-st ± j·st/tl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignTargets {
    /// Distance of the pair left of the imaginary axis.
    pub st: f64,
    /// `|Re| / |Im|` of the pair.
    pub tl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Stable,
    Borderline,
    Unstable,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Stable => "stable",
            Classification::Borderline => "borderline",
            Classification::Unstable => "unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `∫ |w - y| dt` by the rectangle rule.
    pub regulation_area: f64,
    /// Percent of the setpoint left over at the horizon.
    pub permanent_deviation: f64,
    /// Peak above the final value, relative to it.
    pub overshoot: f64,
    pub classification: Classification,
}

/// Matches `a2 (s^2 + 2 St s + St^2 + (St/Tl)^2)` against the loop
/// polynomial `a2 s^2 + (a1 + Td) s + (a0 + K)`.
pub fn design_pd(a2: f64, a1: f64, a0: f64, targets: DesignTargets) -> Result<PdController> {
    let DesignTargets { st, tl } = targets;
    if !(a2 > 0.0) || !a1.is_finite() || !a0.is_finite() {
        return Err(Error::Domain(format!("design needs a2 > 0 and finite a1, a0, got ({a2}, {a1}, {a0})")));
    }
    if !(st > 0.0 && st.is_finite()) || !(tl > 0.0 && tl.is_finite()) {
        return Err(Error::Domain(format!("St and Tl must be positive, got St={st}, Tl={tl}")));
    }
    let td = 2.0 * st * a2 - a1;
    if !(td > 0.0) {
        return Err(Error::Unreachable(format!(
            "St={st} needs Td = {td} <= 0 for a2={a2}, a1={a1}"
        )));
    }
    let im = st / tl;
    let k = a2 * (st * st + im * im) - a0;
    Ok(PdController::integer(k, td))
}

/// Roots of `a s^2 + b s + c` as `(re, im)` pairs, the one with the larger
/// real part first, avoiding cancellation for real roots.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Result<[(f64, f64); 2]> {
    if a == 0.0 || ![a, b, c].iter().all(|v| v.is_finite()) {
        return Err(Error::Domain(format!("not a quadratic: ({a}, {b}, {c})")));
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a).abs();
        return Ok([(re, im), (re, -im)]);
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Ok([(r1.max(r2), 0.0), (r1.min(r2), 0.0)])
}

/// Unity feedback around a plant `Σ a_i D^α_i y = u`:
/// `Σ a_i D^α_i y + Td D^δ y + K y = K w + Td D^δ w`.
pub fn close_loop(plant: &Fode, c: &PdController) -> Result<Fode> {
    match plant.rhs() {
        [FracTerm { coeff, order }] if *coeff == 1.0 && *order == 0.0 => {}
        _ => {
            return Err(Error::InvalidModel(
                "closing the loop needs a plant driven by the bare input".into(),
            ))
        }
    }
    if !c.k.is_finite() || !c.td.is_finite() {
        return Err(Error::InvalidModel(format!("non-finite gains K={}, Td={}", c.k, c.td)));
    }
    if !(c.delta > 0.0) || c.delta >= plant.max_order() {
        return Err(Error::InvalidModel(format!(
            "derivative order {} must lie in (0, {})",
            c.delta,
            plant.max_order()
        )));
    }
    let mut lhs = plant.lhs().to_vec();
    lhs.push(FracTerm::new(c.td, c.delta));
    lhs.push(FracTerm::new(c.k, 0.0));
    Fode::new(&lhs, &[FracTerm::new(c.k, 0.0), FracTerm::new(c.td, c.delta)])
}

/// Quality of a response `y` to the setpoint `w` over `[0, horizon]`.
pub fn response_metrics(y: &TimeSeries, w: &TimeSeries, horizon: f64) -> Result<Metrics> {
    y.check_same_grid(w)?;
    if y.samples.is_empty() {
        return Err(Error::EmptySeries);
    }
    let last = y.time(y.len() - 1);
    if !(horizon > 0.0) || horizon > last + 1e-9 * y.h {
        return Err(Error::Domain(format!(
            "horizon {horizon} outside the series span (0, {last}]"
        )));
    }
    let n = ((horizon - y.t0) / y.h + 1e-9).floor() as usize + 1;
    let h = y.h;
    let (y, w) = (&y.samples[..n], &w.samples[..n]);
    let area = h * y.iter().zip(w).map(|(y, w)| (w - y).abs()).sum::<f64>();

    let tail = (n / 20).max(1);
    let final_y = y[n - tail..].iter().sum::<f64>() / tail as f64;
    let final_w = w[n - tail..].iter().sum::<f64>() / tail as f64;
    let deviation = if final_w != 0.0 {
        100.0 * (final_w - final_y).abs() / final_w.abs()
    } else {
        0.0
    };
    let peak = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let overshoot = if final_y != 0.0 {
        ((peak - final_y) / final_y.abs()).max(0.0)
    } else {
        0.0
    };
    Ok(Metrics {
        regulation_area: area,
        permanent_deviation: deviation,
        overshoot,
        classification: classify_envelope(y, final_y),
    })
}

/// Ratio of the largest `|y - y_final|` in the last quarter to that in the
/// first quarter.
pub fn envelope_ratio(y: &[f64], y_final: f64) -> f64 {
    let q = (y.len() / 4).max(1);
    let peak = |s: &[f64]| s.iter().map(|v| (v - y_final).abs()).fold(0.0, f64::max);
    let first = peak(&y[..q]);
    let last = peak(&y[y.len() - q..]);
    if first == 0.0 {
        if last == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        last / first
    }
}

/// Envelope growth of 10% or more is unstable; decay of less than 10% is
/// borderline.
pub const ENVELOPE_BAND: f64 = 0.1;

fn classify_envelope(y: &[f64], y_final: f64) -> Classification {
    if y.iter().any(|v| !v.is_finite()) {
        return Classification::Unstable;
    }
    let r = envelope_ratio(y, y_final);
    if r >= 1.0 + ENVELOPE_BAND {
        Classification::Unstable
    } else if r > 1.0 - ENVELOPE_BAND {
        Classification::Borderline
    } else {
        Classification::Stable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub classification: Classification,
    /// Last-quarter over first-quarter envelope; infinite after divergence.
    pub envelope_ratio: f64,
}

/// Classifies an already simulated step response of `model`.
///
/// Deviations are measured from the static gain when the loop has one,
/// otherwise from the mean of the last quarter.
pub fn probe_response(model: &Fode, r: &StepResponse) -> Probe {
    if r.is_diverged() {
        return Probe {
            classification: Classification::Unstable,
            envelope_ratio: f64::INFINITY,
        };
    }
    let y = &r.y.samples;
    let y_final = match model.static_gain() {
        Some(g) if g.is_finite() => g,
        _ => {
            let q = (y.len() / 4).max(1);
            y[y.len() - q..].iter().sum::<f64>() / q as f64
        }
    };
    Probe {
        classification: classify_envelope(y, y_final),
        envelope_ratio: envelope_ratio(y, y_final),
    }
}

/// Step-response classification of a closed loop over `grid`.
pub fn stability_probe(model: &Fode, grid: &Grid) -> Result<Classification> {
    let r = solve_step(model, grid)?;
    Ok(probe_response(model, &r).classification)
}

/// Probes `plant` under `K + Td D^δ` for each `Td`, in parallel.
pub fn probe_sweep(
    plant: &Fode,
    k: f64,
    delta: f64,
    tds: &[f64],
    grid: &Grid,
) -> Result<Vec<Classification>> {
    tds.par_iter()
        .map(|&td| stability_probe(&close_loop(plant, &PdController { k, td, delta })?, grid))
        .collect()
}

/// Bracket `(unstable, not_unstable)` around the smallest stabilizing `Td`,
/// narrowed by bisection to width `tol`.
pub fn bisect_stability(
    plant: &Fode,
    k: f64,
    delta: f64,
    mut lo: f64,
    mut hi: f64,
    grid: &Grid,
    tol: f64,
) -> Result<(f64, f64)> {
    let unstable = |td: f64| -> Result<bool> {
        let c = stability_probe(&close_loop(plant, &PdController { k, td, delta })?, grid)?;
        Ok(c == Classification::Unstable)
    };
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::Domain(format!("bad bracket [{lo}, {hi}] or tolerance {tol}")));
    }
    if !unstable(lo)? || unstable(hi)? {
        return Err(Error::Domain(format!(
            "Td = {lo} must be unstable and Td = {hi} not"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if unstable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Metrics of a loop's unit-step response over `[0, horizon]` of `grid`.
pub fn loop_metrics(model: &Fode, grid: &Grid, horizon: f64) -> Result<Metrics> {
    let y = solve_step(model, grid)?.into_result()?;
    response_metrics(&y, &unit_step(grid), horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fode::presets::{integer_second_order, reference_plant, SURROGATE};
    use proptest::prelude::*;

    #[test]
    fn reference_design() {
        let (a2, a1, a0) = SURROGATE;
        let c = design_pd(a2, a1, a0, DesignTargets { st: 2.0, tl: 0.4 }).unwrap();
        assert!((c.td - 2.7343).abs() < 1e-14);
        assert!((c.k - 20.5006).abs() < 1e-4);
        assert_eq!(c.delta, 1.0);
        let [(re, im), _] = quadratic_roots(a2, a1 + c.td, a0 + c.k).unwrap();
        assert!((re + 2.0).abs() < 1e-9 && (im - 5.0).abs() < 1e-9);
    }

    #[test]
    fn unit_design() {
        let c = design_pd(1.0, 0.0, 0.0, DesignTargets { st: 1.0, tl: 1.0 }).unwrap();
        assert_eq!((c.k, c.td), (2.0, 2.0));
    }

    #[test]
    fn unreachable_targets() {
        let t = DesignTargets { st: 0.1, tl: 1.0 };
        assert!(matches!(design_pd(1.0, 5.0, 1.0, t), Err(Error::Unreachable(_))));
        assert!(design_pd(0.0, 0.0, 1.0, t).is_err());
    }

    #[test]
    fn real_roots_without_cancellation() {
        let [(r1, _), (r2, _)] = quadratic_roots(1.0, 1e8, 1.0).unwrap();
        assert!((r1 + 1e-8).abs() < 1e-22);
        assert!((r2 + 1e8).abs() < 1e-6);
    }

    #[test]
    fn loop_coefficients() {
        let plant = integer_second_order(0.7414, 0.2313, 1.0).unwrap();
        let l = close_loop(&plant, &PdController::integer(20.5, 2.7343)).unwrap();
        assert_eq!(l.lhs(), &[(0.7414, 2.0).into(), (0.2313 + 2.7343, 1.0).into(), (21.5, 0.0).into()]);
        assert_eq!(l.rhs(), &[(2.7343, 1.0).into(), (20.5, 0.0).into()]);

        let f = close_loop(&reference_plant(), &PdController { k: 20.5, td: 3.7343, delta: 1.15 }).unwrap();
        assert_eq!(f.lhs_coeff(1.15), Some(3.7343));
        assert_eq!(f.lhs_coeff(2.2), Some(0.8));
        assert_eq!(f.lhs_coeff(0.0), Some(21.5));
        assert_eq!(f.rhs(), &[(3.7343, 1.15).into(), (20.5, 0.0).into()]);

        let too_high = PdController { k: 1.0, td: 1.0, delta: 2.2 };
        assert!(close_loop(&reference_plant(), &too_high).is_err());
        assert!(close_loop(&l, &PdController::integer(1.0, 1.0)).is_err());
    }

    #[test]
    fn perfect_tracking_scores_zero() {
        let w = TimeSeries::from_fn(0.1, 101, |_| 1.0);
        let m = response_metrics(&w, &w, 10.0).unwrap();
        assert_eq!((m.regulation_area, m.permanent_deviation, m.overshoot), (0.0, 0.0, 0.0));
        assert!(response_metrics(&w, &w, 10.5).is_err());
    }

    #[test]
    fn envelope_classes() {
        let decay: Vec<f64> = (0..400).map(|i| 1.0 + (-0.05 * i as f64).exp() * (0.3 * i as f64).cos()).collect();
        assert_eq!(classify_envelope(&decay, 1.0), Classification::Stable);
        let grow: Vec<f64> = (0..400).map(|i| 1.0 + (0.01 * i as f64).exp() * (0.3 * i as f64).cos()).collect();
        assert_eq!(classify_envelope(&grow, 1.0), Classification::Unstable);
        let flat: Vec<f64> = (0..400).map(|i| 1.0 + (0.3 * i as f64).cos()).collect();
        assert_eq!(classify_envelope(&flat, 1.0), Classification::Borderline);
    }

    proptest! {
        #[test]
        fn design_places_requested_poles(a2 in 0.1f64..5.0, a1 in -1.0f64..1.0, a0 in 0.0f64..5.0,
                                         st in 0.5f64..5.0, tl in 0.1f64..3.0) {
            prop_assume!(2.0 * st * a2 - a1 > 0.0);
            let c = design_pd(a2, a1, a0, DesignTargets { st, tl }).unwrap();
            let [(re, im), _] = quadratic_roots(a2, a1 + c.td, a0 + c.k).unwrap();
            prop_assert!((re + st).abs() < 1e-9 * st.max(1.0));
            prop_assert!((im - st / tl).abs() < 1e-9 * (st / tl).max(1.0));
        }

        #[test]
        fn doubling_the_error_doubles_the_area(v in proptest::collection::vec(-3.0f64..3.0, 10..200)) {
            let y = TimeSeries::from_fn(0.05, v.len(), |t| v[(t / 0.05).round() as usize]);
            let y2 = TimeSeries::from_fn(0.05, v.len(), |t| 2.0 * v[(t / 0.05).round() as usize]);
            let w = TimeSeries::from_fn(0.05, v.len(), |_| 0.0);
            let horizon = y.time(v.len() - 1);
            let a = response_metrics(&y, &w, horizon).unwrap().regulation_area;
            let b = response_metrics(&y2, &w, horizon).unwrap().regulation_area;
            prop_assert_eq!(2.0 * a, b);
        }

        #[test]
        fn loop_keeps_every_plant_order(delta in 0.1f64..2.0) {
            let plant = reference_plant();
            let l = close_loop(&plant, &PdController { k: 3.0, td: 1.5, delta }).unwrap();
            for t in plant.lhs() {
                prop_assert!(l.lhs_coeff(t.order).is_some());
            }
            prop_assert_eq!(l.rhs().len(), 2);
            prop_assert_eq!(l.rhs_coeff(0.0), Some(3.0));
            prop_assert_eq!(l.rhs_coeff(delta), Some(1.5));
        }
    }
}
