// Property checks shared by the proptest suite and the acceptance run.
#![allow(dead_code)]

use fracsim::fode::{solve_step, Fode, FracTerm, Grid, TimeSeries};
use fracsim::glops::{frac_diff, gl_coeffs, MemoryPolicy};
use fracsim::specfun::{gamma, mittag_leffler, MlQuery};

pub type Check = Result<(), String>;

fn ml(lambda: f64, mu: f64, k: u32, z: f64) -> Result<f64, String> {
    let v = mittag_leffler(&MlQuery::new(lambda, mu, k, z)).map_err(|e| e.to_string())?;
    if !v.converged {
        return Err(format!("E({lambda},{mu};{k}) at {z} did not converge"));
    }
    Ok(v.value)
}

pub fn gamma_recurrence(x: f64) -> Check {
    let g = gamma(x).map_err(|e| e.to_string())?;
    let g1 = gamma(x + 1.0).map_err(|e| e.to_string())?;
    let r = g1 / (x * g);
    if (r - 1.0).abs() <= 1e-12 {
        Ok(())
    } else {
        Err(format!("Γ({x}+1)/(x Γ(x)) = {r}"))
    }
}

pub fn ml_is_exp(z: f64) -> Check {
    let v = ml(1.0, 1.0, 0, z)?;
    if (v - z.exp()).abs() <= 1e-10 {
        Ok(())
    } else {
        Err(format!("E_1,1({z}) = {v}, exp = {}", z.exp()))
    }
}

pub fn ml_is_exp_ratio(z: f64) -> Check {
    let v = ml(1.0, 2.0, 0, z)?;
    let e = z.exp_m1() / z;
    if (v - e).abs() <= 1e-9 {
        Ok(())
    } else {
        Err(format!("E_1,2({z}) = {v}, expected {e}"))
    }
}

pub fn ml_is_cosh(x: f64) -> Check {
    let v = ml(2.0, 1.0, 0, x * x)?;
    if (v - x.cosh()).abs() <= 1e-12 * x.cosh() {
        Ok(())
    } else {
        Err(format!("E_2,1({x}^2) = {v}, cosh = {}", x.cosh()))
    }
}

pub fn ml_derivative_is_difference(lambda: f64, mu: f64, k: u32, z: f64) -> Check {
    let s = 1e-4;
    let d = ml(lambda, mu, k, z)?;
    let fd = (ml(lambda, mu, k - 1, z + s)? - ml(lambda, mu, k - 1, z - s)?) / (2.0 * s);
    if (d - fd).abs() <= 1e-6 * d.abs().max(1.0) {
        Ok(())
    } else {
        Err(format!("E^({k})_{lambda},{mu}({z}) = {d}, difference {fd}"))
    }
}

pub fn gl_partial_sums_shrink(order: f64) -> Check {
    let b = gl_coeffs(order, 1001).values;
    let s100: f64 = b[..=100].iter().sum();
    let s1000: f64 = b.iter().sum();
    if s1000.abs() < s100.abs() {
        Ok(())
    } else {
        Err(format!("order {order}: |Σ1000| = {} ≥ |Σ100| = {}", s1000.abs(), s100.abs()))
    }
}

/// Orders 1 and 2 are the backward first and second differences.
pub fn integer_order_is_difference(samples: &[f64], h: f64) -> Check {
    let y = TimeSeries::from_fn(h, samples.len(), |t| samples[(t / h).round() as usize]);
    let d1 = frac_diff(&y, 1.0, &MemoryPolicy::Full).map_err(|e| e.to_string())?;
    let d2 = frac_diff(&y, 2.0, &MemoryPolicy::Full).map_err(|e| e.to_string())?;
    let at = |m: isize| if m < 0 { 0.0 } else { samples[m as usize] };
    let scale = samples.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    for m in 0..samples.len() as isize {
        let f1 = (at(m) - at(m - 1)) / h;
        let f2 = (at(m) - 2.0 * at(m - 1) + at(m - 2)) / (h * h);
        if (d1.samples[m as usize] - f1).abs() > 1e-12 * scale / h
            || (d2.samples[m as usize] - f2).abs() > 1e-12 * scale / (h * h)
        {
            return Err(format!("m = {m}: {} vs {f1}, {} vs {f2}", d1.samples[m as usize], d2.samples[m as usize]));
        }
    }
    let d0 = frac_diff(&y, 0.0, &MemoryPolicy::Full).map_err(|e| e.to_string())?;
    if d0.samples != y.samples {
        return Err("order 0 is not the identity".into());
    }
    Ok(())
}

/// `D^α 1 = t^-α / Γ(1-α)` for `0 < α < 1`, within 1% on `[1, 5]`.
pub fn step_derivative_closed_form(order: f64, h: f64) -> Check {
    let n = (5.0 / h).round() as usize + 1;
    let ones = TimeSeries::from_fn(h, n, |_| 1.0);
    let d = frac_diff(&ones, order, &MemoryPolicy::Full).map_err(|e| e.to_string())?;
    let g = gamma(1.0 - order).map_err(|e| e.to_string())?;
    for (m, t) in d.times().enumerate().filter(|&(_, t)| t >= 1.0 - 1e-9) {
        let exact = t.powf(-order) / g;
        if ((d.samples[m] - exact) / exact).abs() > 0.01 {
            return Err(format!("D^{order} 1 at t = {t}: {} vs {exact}", d.samples[m]));
        }
    }
    Ok(())
}

/// The step response of a stable model settles at `r0 / a0` by `t = 40`.
pub fn settles_at_static_gain(model: &Fode, h: f64) -> Check {
    let grid = Grid::new(h, 40.0).map_err(|e| e.to_string())?;
    let y = solve_step(model, &grid)
        .and_then(|r| r.into_result())
        .map_err(|e| e.to_string())?;
    let gain = model.static_gain().ok_or("no static gain")?;
    let last = y.last().ok_or("empty response")?;
    if (last - gain).abs() <= 0.02 * gain.abs() {
        Ok(())
    } else {
        Err(format!("y(40) = {last}, static gain {gain}"))
    }
}

pub fn second_order(a2: f64, a1: f64, a0: f64, r0: f64) -> Fode {
    Fode::new(
        &[FracTerm::new(a2, 2.0), FracTerm::new(a1, 1.0), FracTerm::new(a0, 0.0)],
        &[FracTerm::new(r0, 0.0)],
    )
    .unwrap()
}
