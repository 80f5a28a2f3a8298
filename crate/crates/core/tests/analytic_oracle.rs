//! Series oracles against values from numerical Laplace inversion at 50
//! significant digits, which shares no code path with the series.

#![allow(clippy::excessive_precision)]

use fracsim::analytic::*;
use fracsim::fode::presets::{FPD_DERIVATIVE, FPD_ORDER, PD_DERIVATIVE, PD_GAIN, REFERENCE};

fn plant() -> PlantCoeffs {
    PlantCoeffs::from(REFERENCE)
}

const OPEN: [(f64, f64); 4] = [
    (0.1, 0.003_231_210_900_026_171_974_2),
    (1.0, 0.423_976_252_450_146_982_9),
    (5.0, 0.585_082_992_742_685_052_69),
    (10.0, 0.820_332_518_587_934_399_36),
];

// K = 20.5, Td = 2.7343
const IPD: [(f64, f64); 4] = [
    (0.5, 1.478_223_406_692_733_541),
    (1.0, 0.854_819_650_548_601_946),
    (5.0, 0.950_079_571_874_354_842),
    (10.0, 0.953_844_200_505_317_808),
];

// K = 20.5, Td = 3.7343, δ = 1.15
const FPD: [(f64, f64); 5] = [
    (0.5, 1.287_652_254_626_377_38),
    (1.0, 0.957_927_341_256_108_971),
    (5.0, 0.952_713_580_915_812_747),
    (8.0, 0.952_946_694_790_384_176),
    (10.0, 0.953_067_729_476_208_005),
];

#[test]
fn open_loop_double_double_matches_inversion() {
    let b = SeriesBudget::double_double();
    for (t, y) in OPEN {
        let v = step_open(&plant(), t, &b).unwrap();
        assert!(v.converged);
        assert!((v.value - y).abs() < 1e-15, "t={t}: {} vs {y}", v.value);
        assert!(v.is_reliable(1e-12));
    }
}

#[test]
fn open_loop_working_precision_at_moderate_times() {
    let b = SeriesBudget::working();
    for (t, y) in OPEN.iter().filter(|(t, _)| *t <= 5.0) {
        let v = step_open(&plant(), *t, &b).unwrap();
        assert!((v.value - y).abs() < 1e-10, "t={t}");
        assert!((v.value - y).abs() <= v.error_estimate.max(1e-16));
    }
}

#[test]
fn precision_modes_agree_on_open_loop() {
    let (w, d) = (SeriesBudget::working(), SeriesBudget::double_double());
    for i in 1..=10 {
        let t = 0.5 * i as f64;
        let a = step_open(&plant(), t, &w).unwrap().value;
        let b = step_open(&plant(), t, &d).unwrap().value;
        assert!((a - b).abs() < 1e-8, "t={t}: {a} vs {b}");
    }
}

#[test]
fn integer_pd_loop_matches_inversion() {
    let b = SeriesBudget::double_double();
    for (t, y) in IPD {
        let v = step_closed_ipd(&plant(), PD_GAIN, PD_DERIVATIVE, t, &b).unwrap();
        assert!(v.converged);
        assert!((v.value - y).abs() < 1e-14, "t={t}: {} vs {y}", v.value);
    }
}

#[test]
fn fractional_pd_loop_matches_inversion() {
    let b = SeriesBudget::double_double();
    for (t, y) in FPD {
        let v = step_closed_fpd(&plant(), PD_GAIN, FPD_DERIVATIVE, FPD_ORDER, t, &b).unwrap();
        assert!(v.converged);
        assert!((v.value - y).abs() < 1e-14, "t={t}: {} vs {y}", v.value);
    }
}

#[test]
fn working_precision_flags_its_own_collapse() {
    // cancellation wipes out f64 well before t = 10; the estimate must say so
    let v = step_closed_fpd(
        &plant(),
        PD_GAIN,
        FPD_DERIVATIVE,
        FPD_ORDER,
        10.0,
        &SeriesBudget::working(),
    )
    .unwrap();
    assert!(!v.is_reliable(0.1));
    assert!(v.max_term > 1e20);
}

#[test]
fn unit_order_regulator_reduces_to_integer_pd() {
    let b = SeriesBudget::double_double();
    for t in [0.5, 1.0, 3.0, 5.0] {
        let a = step_closed_ipd(&plant(), PD_GAIN, PD_DERIVATIVE, t, &b).unwrap().value;
        let f = step_closed_fpd(&plant(), PD_GAIN, PD_DERIVATIVE, 1.0, t, &b).unwrap().value;
        assert!((a - f).abs() < 1e-13, "t={t}");
    }
}

#[test]
fn more_outer_terms_change_nothing_once_converged() {
    let w = SeriesBudget::working();
    for t in [0.5, 1.0, 2.0, 3.0, 5.0] {
        let a = step_open(&plant(), t, &w.with_outer_terms(20)).unwrap();
        let b = step_open(&plant(), t, &w.with_outer_terms(40)).unwrap();
        assert!(a.converged);
        assert!((a.value - b.value).abs() < w.tol, "t={t}");
    }
}

#[test]
fn closed_loops_need_more_than_twenty_outer_terms() {
    // twenty terms only settle the closed loops at small t; past that the
    // result must come back marked unconverged rather than silently wrong
    let w = SeriesBudget::working().with_outer_terms(20);
    let small = step_closed_ipd(&plant(), PD_GAIN, PD_DERIVATIVE, 1.0, &w).unwrap();
    assert!(small.converged);
    for t in [2.0, 3.0, 5.0] {
        let v = step_closed_ipd(&plant(), PD_GAIN, PD_DERIVATIVE, t, &w).unwrap();
        assert!(!v.converged, "t={t}");
        let v = step_closed_fpd(&plant(), PD_GAIN, FPD_DERIVATIVE, FPD_ORDER, t, &w).unwrap();
        assert!(!v.converged, "t={t}");
    }
}

#[test]
fn curve_equals_pointwise_evaluation() {
    let r = Response::FractionalPd {
        k: PD_GAIN,
        td: FPD_DERIVATIVE,
        delta: FPD_ORDER,
    };
    let times = [0.0, 0.25, 1.0, 2.5, 4.0];
    let b = SeriesBudget::double_double();
    let c = curve(&plant(), r, &times, &b).unwrap();
    for (v, &t) in c.iter().zip(&times) {
        assert_eq!(v.value, evaluate(&plant(), r, t, &b).unwrap().value, "t={t}");
    }
}

#[test]
fn outer_budget_is_respected() {
    let v = step_open(&plant(), 5.0, &SeriesBudget::working().with_outer_terms(3)).unwrap();
    assert_eq!(v.outer_terms_used, 3);
    assert!(!v.converged);
}
