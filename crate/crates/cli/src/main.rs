//! `ncaa`: generate synthetic data, fit near-convex archetypes, run the
//! baselines, evaluate against ground truth and sweep benchmark grids.

mod bench;
mod commands;
mod config;
mod plotdata;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::LevelFilter;

use ncaa_core::NcaaError;

use crate::config::RunConfig;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const CONFIG: u8 = 2;
    pub const DATA: u8 = 3;
    pub const NUMERIC: u8 = 4;

    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: Self::CONFIG,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: Self::DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn exit_code(err: &NcaaError) -> u8 {
    match err {
        NcaaError::Config(_) | NcaaError::Generation { .. } => CliError::CONFIG,
        NcaaError::NumericFailure { .. } => CliError::NUMERIC,
        NcaaError::Shape { .. }
        | NcaaError::NonFinite { .. }
        | NcaaError::UndefinedMetric(_)
        | NcaaError::Parse { .. }
        | NcaaError::Io(_)
        | NcaaError::Serde(_) => CliError::DATA,
    }
}

impl From<NcaaError> for CliError {
    fn from(err: NcaaError) -> Self {
        CliError {
            code: exit_code(&err),
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::data(format!("i/o error: {err}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::data(format!("serialization error: {err}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "ncaa", version, about = "Near-convex archetypal analysis")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log progress (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write one synthetic instance (X, true W and H, JSON sidecar).
    Synth(commands::SynthArgs),
    /// Fit an NCAA model to a data matrix.
    Solve(commands::SolveArgs),
    /// Run a baseline method (minvol, snpa, simplex-nmf).
    Baseline(commands::BaselineArgs),
    /// Score an estimate against ground-truth archetypes.
    Eval(commands::EvalArgs),
    /// Sweep the synthetic benchmark grid.
    Bench(bench::BenchArgs),
    /// Hyperspectral unmixing: HC anchors, d = 20, fine tuning on.
    Unmix(commands::UnmixArgs),
    /// Emit plot-ready signature and abundance files for a fitted model.
    Plotdata(plotdata::PlotArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(args) => commands::synth(cfg, &args),
        Command::Solve(args) => commands::solve(cfg, &args),
        Command::Baseline(args) => commands::baseline(cfg, &args),
        Command::Eval(args) => commands::eval(cfg, &args),
        Command::Bench(args) => bench::run(cfg, &args),
        Command::Unmix(args) => commands::unmix(cfg, &args),
        Command::Plotdata(args) => plotdata::run(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
