//! Subcommand bodies. Each returns its CSV (if any) and report lines; the
//! caller decides where they go.

use std::fmt::Write as _;

use fracsim::analytic::curve;
use fracsim::control::{
    bisect_stability, design_pd, probe_response, quadratic_roots, response_metrics,
};
use fracsim::fitting::{fit_integer_second_order, simulate_candidate, FitSpec};
use fracsim::fode::{solve_step, unit_step, TimeSeries};

use crate::config::Scenario;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    Analytic,
    Fit,
    Design,
    Metrics,
    Probe,
}

impl std::str::FromStr for Command {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        <Command as clap::ValueEnum>::from_str(s, false)
            .map_err(|_| CliError::Config(format!("unknown command '{s}'")))
    }
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Analytic => "analytic",
            Command::Fit => "fit",
            Command::Design => "design",
            Command::Metrics => "metrics",
            Command::Probe => "probe",
        }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub csv: Option<String>,
    pub report: Vec<(String, String)>,
    /// Set when the run finished but hit a numerical failure.
    pub failure: Option<String>,
}

impl Outcome {
    fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        self.report.push((key.to_string(), value.to_string()));
    }

    pub fn report_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.report {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }
}

/// Shortest text that reads back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

struct Table {
    text: String,
}

impl Table {
    fn new(cmd: Command, sc: &Scenario, header: &[&str]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# fracsim {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(text, "# command: {}", cmd.name());
        let _ = writeln!(text, "# source: {}", sc.source);
        let _ = writeln!(text, "# config-sha256: {}", sc.config.hash());
        let _ = writeln!(text, "{}", header.join(","));
        Table { text }
    }

    fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    fn comment(&mut self, c: &str) {
        let _ = writeln!(self.text, "# {c}");
    }
}

pub fn run(cmd: Command, sc: &Scenario, compare: bool) -> Result<Outcome, CliError> {
    sc.config.validate()?;
    match cmd {
        Command::Simulate => simulate(sc, compare),
        Command::Analytic => analytic(sc),
        Command::Fit => fit(sc),
        Command::Design => design(sc),
        Command::Metrics => metrics(sc),
        Command::Probe => probe(sc),
    }
}

fn simulate(sc: &Scenario, compare: bool) -> Result<Outcome, CliError> {
    let c = &sc.config;
    let model = c.model()?;
    let r = solve_step(&model, &c.grid)?;
    let mut out = Outcome::default();
    let series = if compare {
        let (p, resp) = c.series()?;
        let times: Vec<f64> = r.y.times().collect();
        Some(curve(&p, resp, &times, &c.budget())?)
    } else {
        None
    };
    let header: &[&str] = if compare { &["t", "y", "y_analytic"] } else { &["t", "y"] };
    let mut t = Table::new(Command::Simulate, sc, header);
    for (m, (time, y)) in r.y.times().zip(&r.y.samples).enumerate() {
        match &series {
            Some(s) => t.row(&[time, *y, s[m].value]),
            None => t.row(&[time, *y]),
        }
    }
    out.line("samples", r.y.len());
    if let Some(s) = &series {
        let gap = r.y.samples.iter().zip(s).map(|(a, b)| (a - b.value).abs()).fold(0.0, f64::max);
        out.line("max_abs_gap", num(gap));
        let bad = s.iter().filter(|v| !v.converged).count();
        if bad > 0 {
            t.comment(&format!("analytic series unconverged at {bad} points"));
            out.failure = Some(format!("analytic series unconverged at {bad} points"));
        }
    }
    if c.controller.is_some() {
        out.line("classification", probe_response(&model, &r).classification);
    }
    if let Some(d) = r.divergence {
        t.comment(&format!("diverged at step {} (t = {})", d.step, num(d.t)));
        out.failure = Some(format!("solver diverged at t = {}", d.t));
    }
    out.csv = Some(t.text);
    Ok(out)
}

fn analytic(sc: &Scenario) -> Result<Outcome, CliError> {
    let c = &sc.config;
    let (p, resp) = c.series()?;
    let times: Vec<f64> = (0..c.grid.len()).map(|m| m as f64 * c.grid.h).collect();
    let values = curve(&p, resp, &times, &c.budget())?;
    let mut t = Table::new(Command::Analytic, sc, &["t", "y_analytic", "error_estimate", "converged"]);
    for (time, v) in times.iter().zip(&values) {
        t.row(&[*time, v.value, v.error_estimate, if v.converged { 1.0 } else { 0.0 }]);
    }
    let mut out = Outcome::default();
    let bad = values.iter().filter(|v| !v.converged).count();
    out.line("samples", values.len());
    out.line("unconverged", bad);
    if bad > 0 {
        out.failure = Some(format!("series unconverged at {bad} points"));
    }
    out.csv = Some(t.text);
    Ok(out)
}

fn read_target(path: &std::path::Path) -> Result<TimeSeries, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read target {}: {e}", path.display())))?;
    let mut times = Vec::new();
    let mut ys = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') || line.starts_with(|c: char| c.is_alphabetic()) {
            continue;
        }
        let mut cells = line.split(',').map(|s| s.trim().parse::<f64>());
        match (cells.next(), cells.next()) {
            (Some(Ok(t)), Some(Ok(y))) => {
                times.push(t);
                ys.push(y);
            }
            _ => return Err(CliError::Config(format!("bad target row '{line}'"))),
        }
    }
    if times.len() < 2 {
        return Err(CliError::Config("target needs at least two samples".into()));
    }
    let h = times[1] - times[0];
    Ok(TimeSeries {
        h,
        t0: times[0],
        samples: ys,
    })
}

fn fit(sc: &Scenario) -> Result<Outcome, CliError> {
    let c = &sc.config;
    let fc = c.fit.clone().unwrap_or_default();
    let target = match &fc.target {
        Some(path) => read_target(path)?,
        None => solve_step(&c.plant_model()?, &c.grid)?.into_result()?,
    };
    let mut spec = FitSpec::new(target.clone(), c.grid)
        .with_init(fc.init)
        .with_free(&fc.free);
    spec.max_iters = fc.max_iters;
    spec.ftol = fc.ftol;
    let r = fit_integer_second_order(&spec)?;
    let mut out = Outcome::default();
    out.line("a2", num(r.a2));
    out.line("a1", num(r.a1));
    out.line("a0", num(r.a0));
    out.line("objective", num(r.objective));
    out.line("iterations", r.iterations);
    out.line("converged", r.converged);
    let fitted = simulate_candidate(r.a2, r.a1, r.a0, &c.grid)?;
    let mut t = Table::new(Command::Fit, sc, &["t", "y_target", "y_fit"]);
    for ((time, a), b) in target.times().zip(&target.samples).zip(&fitted.samples) {
        t.row(&[time, *a, *b]);
    }
    out.csv = Some(t.text);
    if !r.converged {
        out.failure = Some(format!("fit stopped after {} iterations", r.iterations));
    }
    Ok(out)
}

fn design(sc: &Scenario) -> Result<Outcome, CliError> {
    let c = &sc.config;
    let targets = c
        .design
        .ok_or_else(|| CliError::Config("design needs a 'design' section with st and tl".into()))?;
    let (a2, a1, a0) = c.integer_coeffs()?;
    let pd = design_pd(a2, a1, a0, targets)?;
    let [(re, im), (re2, im2)] = quadratic_roots(a2, a1 + pd.td, a0 + pd.k)?;
    let mut out = Outcome::default();
    out.line("K", num(pd.k));
    out.line("Td", num(pd.td));
    out.line("delta", num(pd.delta));
    out.line("pole_1", format!("{} {}j", num(re), num(im)));
    out.line("pole_2", format!("{} {}j", num(re2), num(im2)));
    Ok(out)
}

fn metrics(sc: &Scenario) -> Result<Outcome, CliError> {
    let c = &sc.config;
    if c.controller.is_none() {
        return Err(CliError::Config("metrics needs a controller".into()));
    }
    let model = c.model()?;
    let horizon = c.metrics.map_or(c.grid.t_end, |m| m.horizon);
    let r = solve_step(&model, &c.grid)?;
    if let Some(d) = r.divergence {
        return Err(CliError::Numeric(format!("solver diverged at t = {}", d.t)));
    }
    let w = unit_step(&c.grid);
    let m = response_metrics(&r.y, &w, horizon)?;
    let mut out = Outcome::default();
    out.line("horizon", num(horizon));
    out.line("regulation_area", num(m.regulation_area));
    out.line("permanent_deviation_percent", num(m.permanent_deviation));
    out.line("overshoot", num(m.overshoot));
    out.line("classification", m.classification);
    let mut t = Table::new(Command::Metrics, sc, &["t", "w", "y"]);
    for ((time, w), y) in r.y.times().zip(&w.samples).zip(&r.y.samples) {
        t.row(&[time, *w, *y]);
    }
    out.csv = Some(t.text);
    Ok(out)
}

fn probe(sc: &Scenario) -> Result<Outcome, CliError> {
    let c = &sc.config;
    let pd = c
        .controller
        .ok_or_else(|| CliError::Config("probe needs a controller".into()))?;
    let model = c.model()?;
    let r = solve_step(&model, &c.grid)?;
    let p = probe_response(&model, &r);
    let mut out = Outcome::default();
    out.line("td", num(pd.td));
    out.line("classification", p.classification);
    out.line("envelope_ratio", num(p.envelope_ratio));
    if let Some(pc) = c.probe {
        if let Some((lo, hi)) = pc.bisect {
            let (u, s) = bisect_stability(&c.plant_model()?, pd.k, pd.delta, lo, hi, &c.grid, pc.tol)?;
            out.line("unstable_td", num(u));
            out.line("not_unstable_td", num(s));
        }
    }
    Ok(out)
}
