//! Run configuration: an optional JSON file, overridden by command-line flags.

use std::path::Path;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use ncaa_core::baselines::MinVolConfig;
use ncaa_core::selection::SelectionMethod;
use ncaa_core::solver::TunerConfig;
use ncaa_core::synthdata::SyntheticSpec;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// File format for matrices written by the tool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFileFormat {
    #[default]
    Csv,
    Bin,
}

impl MatrixFileFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MatrixFileFormat::Csv => "csv",
            MatrixFileFormat::Bin => "bin",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Selector {
    Snpa,
    Hc,
}

impl From<Selector> for SelectionMethod {
    fn from(s: Selector) -> Self {
        match s {
            Selector::Snpa => SelectionMethod::Snpa,
            Selector::Hc => SelectionMethod::Hc,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rank: Option<usize>,
    /// Number of anchor columns `d`.
    pub anchors: Option<usize>,
    pub selector: Option<SelectionMethod>,
    pub fine_tune: Option<bool>,
    pub seed: u64,
    /// Worker threads for benchmark sweeps; 0 uses all cores.
    pub threads: usize,
    pub output_format: OutputFormat,
    pub matrix_format: MatrixFileFormat,
    pub tuner: TunerConfig,
    pub minvol: MinVolConfig,
    pub synthetic: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rank: None,
            anchors: None,
            selector: None,
            fine_tune: None,
            seed: 0,
            threads: 0,
            output_format: OutputFormat::Json,
            matrix_format: MatrixFileFormat::Csv,
            tuner: TunerConfig::default(),
            minvol: MinVolConfig::default(),
            synthetic: SyntheticSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.tuner.validate()?;
        self.synthetic.validate()?;
        if let Some(0) = self.rank {
            return Err(CliError::config("rank must be >= 1"));
        }
        Ok(())
    }

    pub fn apply_common(&mut self, args: &CommonArgs) {
        if let Some(seed) = args.seed {
            self.seed = seed;
        }
        if let Some(t) = args.threads {
            self.threads = t;
        }
        if let Some(f) = args.format {
            self.output_format = f;
        }
        if let Some(f) = args.matrix_format {
            self.matrix_format = f;
        }
    }

    pub fn apply_tuner(&mut self, args: &TunerArgs) {
        let t = &mut self.tuner;
        set(&mut t.eps_min, args.eps_min);
        set(&mut t.eps_max, args.eps_max);
        set(&mut t.delta, args.delta);
        set(&mut t.block_size, args.block_size);
        set(&mut t.max_outer, args.max_outer);
        set(&mut t.fine_alpha, args.fine_alpha);
        set(&mut t.fine_budget, args.fine_budget);
        if let Some(s) = args.selector {
            self.selector = Some(s.into());
        }
        if let Some(d) = args.anchors {
            self.anchors = Some(d);
        }
        if args.fine_tune {
            self.fine_tune = Some(true);
        }
        if args.no_fine_tune {
            self.fine_tune = Some(false);
        }
    }

    pub fn apply_minvol(&mut self, args: &MinVolArgs) {
        set(&mut self.minvol.lambda, args.lambda);
        set(&mut self.minvol.logdet_delta, args.logdet_delta);
        set(&mut self.minvol.max_iterations, args.minvol_iterations);
    }

    pub fn apply_synthetic(&mut self, args: &SyntheticArgs) {
        let s = &mut self.synthetic;
        set(&mut s.m, args.m);
        set(&mut s.n, args.n);
        set(&mut s.r, args.rank);
        set(&mut s.purity, args.purity);
        set(&mut s.noise, args.noise);
        set(&mut s.dirichlet_alpha, args.alpha);
        set(&mut s.trials, args.trials);
        s.seed = self.seed;
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Format of reports and summaries.
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Format of matrix files written.
    #[arg(long, value_enum)]
    pub matrix_format: Option<MatrixFileFormat>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct TunerArgs {
    #[arg(long)]
    pub eps_min: Option<f64>,
    #[arg(long)]
    pub eps_max: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub fine_alpha: Option<f64>,
    #[arg(long)]
    pub fine_budget: Option<f64>,
    /// How the anchor columns `Y` are chosen.
    #[arg(long, value_enum)]
    pub selector: Option<Selector>,
    /// Number of anchor columns `d`.
    #[arg(long)]
    pub anchors: Option<usize>,
    /// Run the per-column radius refinement after tuning.
    #[arg(long, conflicts_with = "no_fine_tune")]
    pub fine_tune: bool,
    #[arg(long)]
    pub no_fine_tune: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct MinVolArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub logdet_delta: Option<f64>,
    #[arg(long)]
    pub minvol_iterations: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SyntheticArgs {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub purity: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Dirichlet parameter of the abundances.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
}
