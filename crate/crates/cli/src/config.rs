//! Run configuration: the JSON schema shared by preset files and user
//! configs, flag overrides and the manifest hash.

use std::path::{Path, PathBuf};

use fracsim::analytic::{PlantCoeffs, Precision, Response, SeriesBudget};
use fracsim::control::{DesignTargets, PdController};
use fracsim::fitting::FitParam;
use fracsim::fode::{Fode, FracTerm, Grid, InitMode};
use fracsim::glops::MemoryPolicy;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Subcommand a sweep runs for this scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// Output-side `(coeff, order)` terms of `Σ a_i y^(α_i) = u`.
    pub plant: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<PdController>,
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignTargets>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AnalyticConfig {
    #[serde(default)]
    pub precision: Precision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_terms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl AnalyticConfig {
    pub fn budget(&self) -> SeriesBudget {
        let mut b = match self.precision {
            Precision::Working => SeriesBudget::working(),
            Precision::DoubleDouble => SeriesBudget::double_double(),
        };
        if let Some(n) = self.outer_terms {
            b.outer_terms = n;
        }
        if let Some(tol) = self.tol {
            b.tol = tol;
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// CSV with `t,y` columns on the config grid; the plant's own step
    /// response when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<PathBuf>,
    #[serde(default = "default_free")]
    pub free: Vec<FitParam>,
    #[serde(default = "default_init")]
    pub init: [f64; 3],
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_ftol")]
    pub ftol: f64,
}

fn default_free() -> Vec<FitParam> {
    vec![FitParam::A2, FitParam::A1]
}

fn default_init() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

fn default_iters() -> usize {
    2000
}

fn default_ftol() -> f64 {
    1e-14
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            target: None,
            free: default_free(),
            init: default_init(),
            max_iters: default_iters(),
            ftol: default_ftol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Bracket `[unstable Td, not unstable Td]` to narrow by bisection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisect: Option<(f64, f64)>,
    #[serde(default = "default_probe_tol")]
    pub tol: f64,
}

fn default_probe_tol() -> f64 {
    1e-3
}

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub h: Option<f64>,
    pub t_end: Option<f64>,
    pub memory_l: Option<f64>,
    pub delta0: Option<f64>,
    pub init_mode: Option<InitMode>,
    pub terms: Option<usize>,
    pub precision: Option<Precision>,
    pub out: Option<PathBuf>,
}

macro_rules! preset_table {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../presets/", $name, ".json")))),*]
    };
}

pub const PRESETS: &[(&str, &str)] = preset_table!(
    "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig7-frac", "fig8", "fig8-int", "fig9",
    "fig10", "pd-design", "unit-pd", "self-fit",
);

/// A loaded config and where it came from.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: RunConfig,
    pub source: Source,
}

#[derive(Debug, Clone)]
pub enum Source {
    Preset(String),
    File(PathBuf),
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Preset(n) => write!(f, "preset {n}"),
            Source::File(p) => write!(f, "config {}", p.display()),
        }
    }
}

pub fn parse(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

pub fn preset(name: &str) -> Result<Scenario, CliError> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::Config(format!("unknown preset '{name}' (available: {})", names.join(", ")))
    })?;
    Ok(Scenario {
        config: parse(text, name)?,
        source: Source::Preset(name.to_string()),
    })
}

pub fn load_file(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(Scenario {
        config: parse(&text, &path.display().to_string())?,
        source: Source::File(path.to_path_buf()),
    })
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(h) = o.h {
            self.grid.h = h;
        }
        if let Some(t) = o.t_end {
            self.grid.t_end = t;
        }
        match (o.memory_l, o.delta0) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("--memory-L and --delta0 are exclusive".into()))
            }
            (Some(seconds), None) => self.grid.policy = MemoryPolicy::FixedLength { seconds },
            (None, Some(delta0)) => self.grid.policy = MemoryPolicy::ErrorBound { delta0 },
            (None, None) => {}
        }
        if let Some(m) = o.init_mode {
            self.grid.init_mode = m;
        }
        if o.terms.is_some() || o.precision.is_some() {
            let a = self.analytic.get_or_insert_with(AnalyticConfig::default);
            if let Some(n) = o.terms {
                a.outer_terms = Some(n);
            }
            if let Some(p) = o.precision {
                a.precision = p;
            }
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        Ok(())
    }

    /// Checks every field against the library's invariants.
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid.validate()?;
        self.plant_model()?;
        if let Some(c) = &self.controller {
            if !(c.delta > 0.0) || !c.k.is_finite() || !c.td.is_finite() {
                return Err(CliError::Config(format!("invalid controller {c:?}")));
            }
        }
        if let Some(a) = &self.analytic {
            a.budget().validate()?;
        }
        if let Some(d) = &self.design {
            if !(d.st > 0.0) || !(d.tl > 0.0) {
                return Err(CliError::Config(format!("design targets must be positive, got {d:?}")));
            }
        }
        if let Some(m) = &self.metrics {
            if !(m.horizon > 0.0) || m.horizon > self.grid.t_end * (1.0 + 1e-12) {
                return Err(CliError::Config(format!(
                    "metrics horizon {} must lie in (0, t_end = {}]",
                    m.horizon, self.grid.t_end
                )));
            }
        }
        if let Some(p) = &self.probe {
            if !(p.tol > 0.0) {
                return Err(CliError::Config("probe tol must be positive".into()));
            }
            if let Some((lo, hi)) = p.bisect {
                if !(lo < hi) {
                    return Err(CliError::Config(format!("bisection bracket [{lo}, {hi}] is empty")));
                }
            }
        }
        Ok(())
    }

    pub fn plant_model(&self) -> Result<Fode, CliError> {
        let lhs: Vec<FracTerm> = self.plant.iter().map(|&t| t.into()).collect();
        Ok(Fode::new(&lhs, &[FracTerm::new(1.0, 0.0)])?)
    }

    /// Closed loop when a controller is configured, the plant otherwise.
    pub fn model(&self) -> Result<Fode, CliError> {
        let plant = self.plant_model()?;
        match &self.controller {
            Some(c) => Ok(fracsim::control::close_loop(&plant, c)?),
            None => Ok(plant),
        }
    }

    /// `(a2, a1, a0)` of an integer plant with orders among 2, 1 and 0.
    pub fn integer_coeffs(&self) -> Result<(f64, f64, f64), CliError> {
        let plant = self.plant_model()?;
        if plant.lhs().iter().any(|t| ![0.0, 1.0, 2.0].contains(&t.order)) {
            return Err(CliError::Config("design needs an integer plant of orders 2, 1 and 0".into()));
        }
        let a = |o: f64| plant.lhs_coeff(o).unwrap_or(0.0);
        Ok((a(2.0), a(1.0), a(0.0)))
    }

    /// Series parameters for a plant `a2 y^(α) + a1 y^(β) + a0 y`.
    pub fn series(&self) -> Result<(PlantCoeffs, Response), CliError> {
        let plant = self.plant_model()?;
        let p = match plant.lhs() {
            [hi, mid, lo] if lo.order == 0.0 => PlantCoeffs {
                a2: hi.coeff,
                alpha: hi.order,
                a1: mid.coeff,
                beta: mid.order,
                a0: lo.coeff,
            },
            _ => {
                return Err(CliError::Config(
                    "the series needs a plant a2 y^(alpha) + a1 y^(beta) + a0 y".into(),
                ))
            }
        };
        let r = match self.controller {
            None => Response::Open,
            Some(c) if c.delta == 1.0 => Response::IntegerPd { k: c.k, td: c.td },
            Some(c) => Response::FractionalPd {
                k: c.k,
                td: c.td,
                delta: c.delta,
            },
        };
        Ok((p, r))
    }

    pub fn budget(&self) -> SeriesBudget {
        self.analytic.clone().unwrap_or_default().budget()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}
