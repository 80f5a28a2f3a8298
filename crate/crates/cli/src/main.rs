//! `fracsim`: simulate, compare, fit and tune fractional-order loops from
//! JSON configs or the bundled presets.
//!
//! Exit codes: 0 ok, 2 config or validation error, 3 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fracsim::analytic::Precision;
use fracsim::fode::InitMode;
use rayon::prelude::*;

use commands::{Command, Outcome};
use config::{Overrides, Scenario};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<fracsim::Error> for CliError {
    fn from(e: fracsim::Error) -> Self {
        use fracsim::Error as E;
        match e {
            E::Overflow(_) | E::DegenerateDenominator(_) | E::Diverged { .. } | E::Pole { .. } => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "fracsim", version, about = "Fractional-order control loop toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Numerical step response as CSV.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Add the series solution as a `y_analytic` column.
        #[arg(long)]
        compare: bool,
    },
    /// Series step response as CSV.
    Analytic {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fit an integer second-order surrogate.
    Fit {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Pole-placement PD design.
    Design {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Regulation area, deviation and overshoot of a closed loop.
    Metrics {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Stability classification of a closed loop.
    Probe {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run several scenarios in parallel, each with its own command.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run config.
    #[arg(conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled scenario instead of a config file.
    #[arg(long)]
    preset: Option<String>,
    #[command(flatten)]
    flags: Flags,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// Time step.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Fixed memory length in seconds.
    #[arg(long = "memory-L")]
    memory_l: Option<f64>,
    /// Memory length from the admissible error.
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long, value_enum)]
    init_mode: Option<InitArg>,
    /// Outer series terms.
    #[arg(long)]
    terms: Option<usize>,
    #[arg(long, value_enum)]
    precision: Option<PrecisionArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Direct,
    Legacy,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Working,
    Dd,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON run configs.
    configs: Vec<PathBuf>,
    /// Bundled scenarios; all of them when nothing is given.
    #[arg(long)]
    preset: Vec<String>,
    #[command(flatten)]
    flags: Flags,
    /// Directory for one CSV per scenario.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add series columns to simulations.
    #[arg(long)]
    compare: bool,
}

impl Flags {
    fn overrides(&self, out: Option<PathBuf>) -> Overrides {
        Overrides {
            h: self.h,
            t_end: self.t_end,
            memory_l: self.memory_l,
            delta0: self.delta0,
            init_mode: self.init_mode.map(|m| match m {
                InitArg::Direct => InitMode::Direct,
                InitArg::Legacy => InitMode::Legacy,
            }),
            terms: self.terms,
            precision: self.precision.map(|p| match p {
                PrecisionArg::Working => Precision::Working,
                PrecisionArg::Dd => Precision::DoubleDouble,
            }),
            out,
        }
    }
}

fn load(config: Option<&Path>, preset: Option<&str>, o: &Overrides) -> Result<Scenario, CliError> {
    let mut sc = match (config, preset) {
        (Some(p), None) => config::load_file(p)?,
        (None, Some(n)) => config::preset(n)?,
        _ => return Err(CliError::Config("give either a config file or --preset".into())),
    };
    sc.config.apply(o)?;
    sc.config.validate()?;
    Ok(sc)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn single(cmd: Command, run: RunArgs, compare: bool) -> Result<(), CliError> {
    let o = run.flags.overrides(run.out.clone());
    let sc = load(run.config.as_deref(), run.preset.as_deref(), &o)?;
    let outcome = commands::run(cmd, &sc, compare)?;
    let streams_csv = matches!(cmd, Command::Simulate | Command::Analytic);
    let mut report_to_stderr = false;
    if let Some(csv) = &outcome.csv {
        match &sc.config.out {
            Some(path) => write_file(path, csv)?,
            None if streams_csv => {
                std::io::stdout().write_all(csv.as_bytes()).ok();
                report_to_stderr = true;
            }
            None => {}
        }
    }
    let report = outcome.report_text();
    if report_to_stderr {
        eprint!("{report}");
    } else {
        print!("{report}");
    }
    match outcome.failure {
        Some(f) => Err(CliError::Numeric(f)),
        None => Ok(()),
    }
}

fn scenario_name(sc: &Scenario) -> String {
    if let Some(n) = &sc.config.name {
        return n.clone();
    }
    match &sc.source {
        config::Source::File(p) => p.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into()),
        config::Source::Preset(n) => n.clone(),
    }
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let o = args.flags.overrides(None);
    let names: Vec<String> = if args.preset.is_empty() && args.configs.is_empty() {
        config::PRESETS.iter().map(|(n, _)| n.to_string()).collect()
    } else {
        args.preset.clone()
    };
    let mut scenarios = Vec::new();
    for n in &names {
        scenarios.push(load(None, Some(n), &o)?);
    }
    for p in &args.configs {
        scenarios.push(load(Some(p), None, &o)?);
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    let results: Vec<(String, Command, Result<Outcome, CliError>)> = scenarios
        .par_iter()
        .map(|sc| {
            let name = scenario_name(sc);
            let cmd = sc.config.command.as_deref().unwrap_or("simulate").parse::<Command>();
            match cmd {
                Ok(cmd) => (name, cmd, commands::run(cmd, sc, args.compare)),
                Err(e) => (name, Command::Simulate, Err(e)),
            }
        })
        .collect();

    let mut worst = 0u8;
    for (name, cmd, r) in results {
        match r {
            Ok(outcome) => {
                if let (Some(dir), Some(csv)) = (&args.out, &outcome.csv) {
                    write_file(&dir.join(format!("{name}.csv")), csv)?;
                }
                let fields: Vec<String> = outcome.report.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let status = match &outcome.failure {
                    Some(f) => {
                        worst = worst.max(3);
                        format!("failed ({f})")
                    }
                    None => "ok".into(),
                };
                println!("{name} [{}] {status}: {}", cmd.name(), fields.join(" "));
            }
            Err(e) => {
                worst = worst.max(e.code());
                println!("{name} [{}] error: {e}", cmd.name());
            }
        }
    }
    match worst {
        0 => Ok(()),
        2 => Err(CliError::Config("some scenarios were invalid".into())),
        _ => Err(CliError::Numeric("some scenarios failed numerically".into())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Simulate { run, compare } => single(Command::Simulate, run, compare),
        Cmd::Analytic { run } => single(Command::Analytic, run, false),
        Cmd::Fit { run } => single(Command::Fit, run, false),
        Cmd::Design { run } => single(Command::Design, run, false),
        Cmd::Metrics { run } => single(Command::Metrics, run, false),
        Cmd::Probe { run } => single(Command::Probe, run, false),
        Cmd::Sweep(args) => sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
