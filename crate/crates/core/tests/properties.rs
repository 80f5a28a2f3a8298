mod common;

use common::*;
use fracsim::control::{close_loop, stability_probe, PdController};
use fracsim::fitting::{fit_integer_second_order, fit_objective, simulate_candidate, FitSpec};
use fracsim::fode::presets::*;
use fracsim::fode::{solve_step, unit_step, Grid, InitMode, TimeSeries};
use fracsim::glops::{frac_diff, MemoryPolicy};
use fracsim::specfun::{mittag_leffler, mittag_leffler_dd, MlQuery};
use proptest::prelude::*;

fn ok(c: Check) -> Result<(), TestCaseError> {
    c.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gamma_satisfies_its_recurrence(x in 0.1f64..20.0) {
        ok(gamma_recurrence(x))?;
    }

    #[test]
    fn unit_orders_give_the_exponential(z in -5.0f64..5.0) {
        ok(ml_is_exp(z))?;
    }
}

proptest! {
    #[test]
    fn second_parameter_two_gives_the_exponential_ratio(z in 0.01f64..5.0, neg: bool) {
        ok(ml_is_exp_ratio(if neg { -z } else { z }))?;
    }

    #[test]
    fn order_two_gives_the_hyperbolic_cosine(x in -3.0f64..3.0) {
        ok(ml_is_cosh(x))?;
    }

    #[test]
    fn derivatives_match_differences(lambda in 0.5f64..2.5, mu in 0.5f64..2.5, k in 1u32..4, z in -2.0f64..2.0) {
        ok(ml_derivative_is_difference(lambda, mu, k, z))?;
    }

    #[test]
    fn integer_orders_are_finite_differences(
        v in proptest::collection::vec(-10.0f64..10.0, 1..80),
        h in 0.001f64..0.5,
    ) {
        ok(integer_order_is_difference(&v, h))?;
    }

    #[test]
    fn stable_second_order_settles(a2 in 0.2f64..2.0, a1 in 1.0f64..3.0, a0 in 0.5f64..3.0, r0 in -2.0f64..2.0) {
        prop_assume!(r0.abs() > 0.1);
        ok(settles_at_static_gain(&second_order(a2, a1, a0, r0), 0.05))?;
    }

    #[test]
    fn fit_never_worsens_the_start(a2 in 0.5f64..1.5, a1 in 0.1f64..1.0) {
        let g = Grid::new(0.1, 10.0).unwrap();
        let target = solve_step(&reference_plant(), &g).unwrap().into_result().unwrap();
        let init = [a2, a1, 1.0];
        let r = fit_integer_second_order(&FitSpec::new(target.clone(), g).with_init(init)).unwrap();
        prop_assert!(r.objective <= fit_objective(&target, &g, init));
    }
}

#[test]
fn weights_sum_towards_zero() {
    for order in [0.5, 0.9, 2.2] {
        gl_partial_sums_shrink(order).unwrap();
    }
}

#[test]
fn half_derivative_of_a_step() {
    step_derivative_closed_form(0.5, 0.01).unwrap();
    step_derivative_closed_form(0.3, 0.01).unwrap();
}

#[test]
fn tuned_loops_settle() {
    let (a2, a1, a0) = SURROGATE;
    let loops = [
        integer_pd_loop(a2, a1, a0, PD_GAIN, PD_DERIVATIVE).unwrap(),
        fractional_pd_loop(&REFERENCE, PD_GAIN, PD_DERIVATIVE, 1.0).unwrap(),
        fractional_pd_loop(&REFERENCE, PD_GAIN, FPD_DERIVATIVE, FPD_ORDER).unwrap(),
    ];
    for l in &loops {
        settles_at_static_gain(l, 0.01).unwrap();
    }
}

#[test]
fn half_derivatives_compose() {
    let h = 0.01;
    let y = TimeSeries::from_fn(h, 501, |t| t * t * t.sin());
    let half = frac_diff(&frac_diff(&y, 0.5, &MemoryPolicy::Full).unwrap(), 0.5, &MemoryPolicy::Full).unwrap();
    let one = frac_diff(&y, 1.0, &MemoryPolicy::Full).unwrap();
    let rms = |v: &mut dyn Iterator<Item = f64>| {
        let (s, n) = v.fold((0.0, 0), |(s, n), x| (s + x * x, n + 1));
        (s / n as f64).sqrt()
    };
    let err = rms(&mut half.samples.iter().zip(&one.samples).map(|(a, b)| a - b));
    let size = rms(&mut one.samples.iter().copied());
    assert!(err <= 0.02 * size, "{err} vs {size}");
}

#[test]
fn short_memory_stays_within_its_bound() {
    let g = Grid::new(0.05, 10.0).unwrap();
    let full = solve_step(&reference_plant(), &g).unwrap().into_result().unwrap();
    let short = solve_step(&reference_plant(), &g.with_policy(MemoryPolicy::ErrorBound { delta0: 0.01 }))
        .unwrap()
        .into_result()
        .unwrap();
    assert!(full.max_abs_diff(&short).unwrap() <= 0.01 * full.max_abs());
    // a window short enough to bite still degrades gracefully
    let cut = solve_step(&reference_plant(), &g.with_policy(MemoryPolicy::FixedLength { seconds: 2.0 }))
        .unwrap()
        .into_result()
        .unwrap();
    assert!(full.max_abs_diff(&cut).unwrap() > 0.0);
}

// Fixed-order recurrence for a2 y'' + c1 y' + c0 y = K w + Td w', written out
// with the same operation order as the general solver.
#[allow(clippy::neg_multiply, clippy::identity_op)]
fn pd_recurrence(a2: f64, c1: f64, c0: f64, k: f64, td: f64, w: &[f64], h: f64) -> Vec<f64> {
    let (s2, s1, s0) = (a2 * h.powf(-2.0), c1 * h.powf(-1.0), c0 * h.powf(0.0));
    let (r1, r0) = (td * h.powf(-1.0), k * h.powf(0.0));
    let denom = 0.0 + s2 * 1.0 + s1 * 1.0 + s0 * 1.0;
    let mut y = vec![0.0];
    for m in 1..w.len() {
        let mut num = 0.0;
        num += r1 * (0.0 + 1.0 * w[m] + -1.0 * w[m - 1]);
        num += r0 * (0.0 + 1.0 * w[m]);
        let second = if m >= 2 {
            0.0 + -2.0 * y[m - 1] + 1.0 * y[m - 2]
        } else {
            0.0 + -2.0 * y[m - 1]
        };
        num -= s2 * second;
        num -= s1 * (0.0 + -1.0 * y[m - 1]);
        num -= s0 * 0.0;
        y.push(num / denom);
    }
    y
}

#[test]
fn general_solver_reproduces_the_integer_pd_recurrence() {
    let (a2, a1, a0) = SURROGATE;
    let g = Grid::new(0.01, 10.0).unwrap();
    let l = integer_pd_loop(a2, a1, a0, PD_GAIN, PD_DERIVATIVE).unwrap();
    let y = solve_step(&l, &g).unwrap().into_result().unwrap();
    let w = unit_step(&g);
    let hand = pd_recurrence(a2, a1 + PD_DERIVATIVE, a0 + PD_GAIN, PD_GAIN, PD_DERIVATIVE, &w.samples, g.h);
    assert_eq!(y.samples, hand);
}

#[test]
fn refinement_converges() {
    let diffs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let g = Grid::new(h, 10.0).unwrap();
            let a = solve_step(&reference_plant(), &g).unwrap().into_result().unwrap();
            let b = solve_step(&reference_plant(), &g.halved()).unwrap().into_result().unwrap();
            a.max_abs_diff(&b.decimate(2)).unwrap()
        })
        .collect();
    assert!(diffs[1] < diffs[0] && diffs[2] < diffs[1], "{diffs:?}");
}

#[test]
fn start_modes_meet_as_steps_shrink() {
    let g = Grid::new(0.0125, 10.0).unwrap();
    let d = solve_step(&reference_plant(), &g).unwrap().into_result().unwrap();
    let l = solve_step(&reference_plant(), &g.with_init(InitMode::Legacy)).unwrap().into_result().unwrap();
    let worst = d
        .times()
        .zip(d.samples.iter().zip(&l.samples))
        .filter(|(t, _)| *t >= 1.0)
        .map(|(_, (a, b))| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 0.01, "{worst}");
}

#[test]
fn compensated_sums_match_extended_precision() {
    // the open-loop series arguments on [0, 2]
    let (lambda, z_coeff) = (REFERENCE.alpha - REFERENCE.beta, -REFERENCE.a1 / REFERENCE.a2);
    for i in 1..=20 {
        let t = 0.1 * i as f64;
        let z = z_coeff * t.powf(lambda);
        for k in 0..4u32 {
            let mu = REFERENCE.alpha + REFERENCE.beta * k as f64 + 1.0;
            let q = MlQuery::new(lambda, mu, k, z);
            let a = mittag_leffler(&q).unwrap().value;
            let b = mittag_leffler_dd(&q).unwrap().value;
            assert!((a - b).abs() <= 1e-11 * b.abs(), "t={t} k={k}: {a} vs {b}");
        }
    }
}

#[test]
fn fit_argmin_does_not_depend_on_the_start() {
    let g = Grid::new(0.1, 10.0).unwrap();
    let target = solve_step(&reference_plant(), &g).unwrap().into_result().unwrap();
    let a = fit_integer_second_order(&FitSpec::new(target.clone(), g)).unwrap();
    let b = fit_integer_second_order(&FitSpec::new(target, g).with_init([0.4, 0.8, 1.0])).unwrap();
    assert!((a.a2 - b.a2).abs() <= 1e-3 && (a.a1 - b.a1).abs() <= 1e-3, "{a:?} {b:?}");
}

#[test]
fn closer_fractional_family_fits_better() {
    // a plant nearer to second order leaves a smaller residual
    let g = Grid::new(0.1, 10.0).unwrap();
    let target_far = solve_step(&reference_plant(), &g).unwrap().into_result().unwrap();
    let p = PlantParams { alpha: 1.8, beta: 0.8, ..REFERENCE };
    let target_near = solve_step(&p.fode(), &g).unwrap().into_result().unwrap();
    let far = fit_integer_second_order(&FitSpec::new(target_far, g)).unwrap();
    let nearer = fit_integer_second_order(&FitSpec::new(target_near, g)).unwrap();
    assert!(nearer.objective < far.objective, "{} vs {}", nearer.objective, far.objective);
    assert!(simulate_candidate(nearer.a2, nearer.a1, nearer.a0, &g).is_ok());
}

#[test]
fn probe_classes_survive_halving_the_step() {
    let grid = Grid::new(0.005, 40.0).unwrap();
    let (a2, a1, a0) = SURROGATE;
    let loops = [
        integer_pd_loop(a2, a1, a0, PD_GAIN, PD_DERIVATIVE).unwrap(),
        close_loop(&reference_plant(), &PdController::integer(PD_GAIN, 1.0)).unwrap(),
        close_loop(&reference_plant(), &PdController::integer(PD_GAIN, 0.5)).unwrap(),
    ];
    for l in &loops {
        let a = stability_probe(l, &grid).unwrap();
        let b = stability_probe(l, &grid.halved()).unwrap();
        assert_eq!(a, b, "{:?}", l.lhs());
    }
}
