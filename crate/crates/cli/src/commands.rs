//! Single-run subcommands: synth, solve, unmix, baseline, eval.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use ncaa_core::baselines::{minvol_nmf, simplex_nmf, snpa_unmix};
use ncaa_core::evaluation::{evaluate, EvalReport};
use ncaa_core::linalg::io::{read_matrix, write_matrix};
use ncaa_core::selection::{select, SelectionMethod};
use ncaa_core::solver::{fine_tune, tune_epsilon, NcaaModel};
use ncaa_core::synthdata::{generate, InstanceSidecar};
use ncaa_core::DenseMatrix;

use crate::config::{CommonArgs, MatrixFileFormat, MinVolArgs, OutputFormat, RunConfig, SyntheticArgs, TunerArgs};
use crate::{CliError, CliResult};

/// Fails with a data error unless `path` is an existing file.
pub fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::data(format!("no such file: {}", path.display())))
    }
}

pub fn prepare_out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::data(format!("cannot create output directory {}: {e}", dir.display())))
}

pub fn write_matrix_as(dir: &Path, stem: &str, format: MatrixFileFormat, m: &DenseMatrix) -> CliResult<PathBuf> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    write_matrix(&path, m)?;
    Ok(path)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Writes `report` as `report.json` or `report.csv` inside `dir`.
fn write_report(dir: &Path, report: &EvalReport, format: OutputFormat) -> CliResult<()> {
    match format {
        OutputFormat::Json => fs::write(dir.join("report.json"), report.to_json()? + "\n")?,
        OutputFormat::Csv => fs::write(dir.join("report.csv"), report_csv(report))?,
    }
    Ok(())
}

fn report_csv(report: &EvalReport) -> String {
    format!("{}\n{}\n", EvalReport::CSV_HEADER, report.csv_row())
}

fn read_truth(path: &Path, m: usize, r: usize) -> CliResult<DenseMatrix> {
    let w = read_matrix(path)?;
    if w.shape() != (m, r) {
        return Err(CliError::data(format!(
            "ground truth {} is {:?}, expected ({m}, {r})",
            path.display(),
            w.shape()
        )));
    }
    Ok(w)
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Trial index; selects the random stream.
    #[arg(long, default_value_t = 0)]
    pub trial: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn synth(mut cfg: RunConfig, args: &SynthArgs) -> CliResult<()> {
    cfg.apply_common(&args.common);
    cfg.apply_synthetic(&args.synthetic);
    cfg.validate()?;
    prepare_out_dir(&args.out)?;

    let inst = generate(&cfg.synthetic, args.trial)?;
    let fmt = cfg.matrix_format;
    write_matrix_as(&args.out, "x", fmt, &inst.x)?;
    write_matrix_as(&args.out, "w_true", fmt, &inst.w_true)?;
    write_matrix_as(&args.out, "h_true", fmt, &inst.h_true)?;
    let sidecar = InstanceSidecar {
        spec: cfg.synthetic.clone(),
        trial: args.trial,
        realized_purity: inst.realized_purity,
    };
    write_json(&args.out.join("instance.json"), &sidecar)?;
    info!("wrote instance to {}", args.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Data matrix, `m × n` (`.csv`, otherwise binary).
    #[arg(long)]
    pub input: PathBuf,
    /// Number of archetypes `r`.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Ground-truth archetypes `m × r`; adds an evaluation report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub tuner: TunerArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub out: PathBuf,
}

pub type SolveArgs = FitArgs;
pub type UnmixArgs = FitArgs;

struct FitDefaults {
    selector: SelectionMethod,
    anchors: fn(usize) -> usize,
    fine_tune: bool,
    tag: &'static str,
}

#[derive(Serialize)]
struct FitSummary {
    rank: usize,
    anchors: usize,
    selector: SelectionMethod,
    anchor_indices: Vec<usize>,
    fine_tune: bool,
    epsilon: f64,
    epsilons: Vec<f64>,
    final_error: f64,
    rel_error: f64,
    wall_time: f64,
}

pub fn solve(cfg: RunConfig, args: &SolveArgs) -> CliResult<()> {
    fit(
        cfg,
        args,
        FitDefaults {
            selector: SelectionMethod::Snpa,
            anchors: |r| 10 * r,
            fine_tune: false,
            tag: "ncaa",
        },
    )
}

pub fn unmix(cfg: RunConfig, args: &UnmixArgs) -> CliResult<()> {
    fit(
        cfg,
        args,
        FitDefaults {
            selector: SelectionMethod::Hc,
            anchors: |_| 20,
            fine_tune: true,
            tag: "ncaa",
        },
    )
}

fn resolve_rank(flag: Option<usize>, cfg: &RunConfig) -> CliResult<usize> {
    match flag.or(cfg.rank) {
        Some(0) => Err(CliError::config("rank must be >= 1")),
        Some(r) => Ok(r),
        None => Err(CliError::config("--rank is required")),
    }
}

fn fit(mut cfg: RunConfig, args: &FitArgs, defaults: FitDefaults) -> CliResult<()> {
    cfg.apply_common(&args.common);
    cfg.apply_tuner(&args.tuner);
    cfg.validate()?;
    let r = resolve_rank(args.rank, &cfg)?;
    let d = cfg.anchors.unwrap_or((defaults.anchors)(r));
    if r > d {
        return Err(CliError::config(format!("rank {r} exceeds the number of anchors {d}")));
    }
    let selector = cfg.selector.unwrap_or(defaults.selector);
    let fine = cfg.fine_tune.unwrap_or(defaults.fine_tune);
    require_file(&args.input)?;
    if let Some(t) = &args.truth {
        require_file(t)?;
    }
    prepare_out_dir(&args.out)?;

    let x = read_matrix(&args.input)?;
    if d > x.cols() {
        return Err(CliError::config(format!("{d} anchors requested but X has {} columns", x.cols())));
    }
    let truth = match &args.truth {
        Some(t) => Some(read_truth(t, x.rows(), r)?),
        None => None,
    };

    let start = Instant::now();
    let selection = select(&x, d, selector)?;
    if selection.truncated {
        warn!("selection stopped after {} of {d} anchors", selection.indices.len());
    }
    info!("selected {} anchors with {selector:?}", selection.indices.len());
    let mut model: NcaaModel = tune_epsilon(&x, &selection.y, r, &cfg.tuner)?;
    info!("tuned epsilon {:.4e}, error {:.6e}", model.epsilons[0], model.final_error);
    if fine {
        model = fine_tune(&x, &selection.y, &model, &cfg.tuner)?;
        info!("fine tuning done, error {:.6e}", model.final_error);
    }
    let wall_time = start.elapsed().as_secs_f64();

    let w = model.archetypes();
    fs::write(args.out.join("model.json"), model.to_json()? + "\n")?;
    write_matrix_as(&args.out, "w", cfg.matrix_format, &w)?;
    write_matrix_as(&args.out, "h", cfg.matrix_format, &model.h)?;
    let summary = FitSummary {
        rank: r,
        anchors: selection.indices.len(),
        selector,
        anchor_indices: selection.indices.clone(),
        fine_tune: fine,
        epsilon: model.epsilons.iter().copied().fold(0.0, f64::max),
        epsilons: model.epsilons.clone(),
        final_error: model.final_error,
        rel_error: model.relative_error(&x)?,
        wall_time,
    };
    write_json(&args.out.join("summary.json"), &summary)?;

    if let Some(w_true) = truth {
        let x_hat = w.matmul(&model.h)?;
        let report = evaluate(&w, &w_true, &x, &x_hat)?.with_tag(defaults.tag, wall_time);
        write_report(&args.out, &report, cfg.output_format)?;
        println!("mrsa {:.6} rel_error {:.6e}", report.mrsa_average, report.rel_error);
    } else {
        println!("rel_error {:.6e} epsilon {:.6e}", summary.rel_error, summary.epsilon);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    Minvol,
    Snpa,
    SimplexNmf,
}

impl BaselineMethod {
    fn tag(self) -> &'static str {
        match self {
            BaselineMethod::Minvol => "minvol",
            BaselineMethod::Snpa => "snpa",
            BaselineMethod::SimplexNmf => "simplex-nmf",
        }
    }
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub minvol: MinVolArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// Factors written by baselines that have no richer model type.
#[derive(Serialize)]
struct PlainFactors<'a> {
    method: &'a str,
    w: &'a DenseMatrix,
    h: &'a DenseMatrix,
}

pub fn baseline(mut cfg: RunConfig, args: &BaselineArgs) -> CliResult<()> {
    cfg.apply_common(&args.common);
    cfg.apply_minvol(&args.minvol);
    cfg.validate()?;
    if args.method == BaselineMethod::Minvol {
        cfg.minvol.validate()?;
    }
    let r = resolve_rank(args.rank, &cfg)?;
    require_file(&args.input)?;
    if let Some(t) = &args.truth {
        require_file(t)?;
    }
    prepare_out_dir(&args.out)?;

    let x = read_matrix(&args.input)?;
    let truth = match &args.truth {
        Some(t) => Some(read_truth(t, x.rows(), r)?),
        None => None,
    };

    let start = Instant::now();
    let (w, h) = match args.method {
        BaselineMethod::Snpa => {
            let (w, h) = snpa_unmix(&x, r)?;
            write_json(
                &args.out.join("model.json"),
                &PlainFactors {
                    method: "snpa",
                    w: &w,
                    h: &h,
                },
            )?;
            (w, h)
        }
        BaselineMethod::Minvol | BaselineMethod::SimplexNmf => {
            let model = if args.method == BaselineMethod::Minvol {
                minvol_nmf(&x, r, &cfg.minvol)?
            } else {
                simplex_nmf(&x, r, &cfg.minvol)?
            };
            fs::write(args.out.join("model.json"), model.to_json()? + "\n")?;
            (model.w, model.h)
        }
    };
    let wall_time = start.elapsed().as_secs_f64();
    write_matrix_as(&args.out, "w", cfg.matrix_format, &w)?;
    write_matrix_as(&args.out, "h", cfg.matrix_format, &h)?;

    let x_hat = w.matmul(&h)?;
    if let Some(w_true) = truth {
        let report = evaluate(&w, &w_true, &x, &x_hat)?.with_tag(args.method.tag(), wall_time);
        write_report(&args.out, &report, cfg.output_format)?;
        println!("mrsa {:.6} rel_error {:.6e}", report.mrsa_average, report.rel_error);
    } else {
        let rel = x.sub(&x_hat)?.fro_norm() / x.fro_norm();
        println!("rel_error {rel:.6e}");
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Estimated archetypes `m × r`.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Estimated abundances `r × n`.
    #[arg(long)]
    pub abundances: PathBuf,
    /// Data matrix `m × n`.
    #[arg(long)]
    pub input: PathBuf,
    /// Ground-truth archetypes `m × r`.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value = "estimate")]
    pub tag: String,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn eval(mut cfg: RunConfig, args: &EvalArgs) -> CliResult<()> {
    cfg.apply_common(&args.common);
    cfg.validate()?;
    for p in [&args.estimate, &args.abundances, &args.input, &args.truth] {
        require_file(p)?;
    }
    if let Some(parent) = args.out.as_deref().and_then(Path::parent) {
        if !parent.as_os_str().is_empty() {
            prepare_out_dir(parent)?;
        }
    }

    let w = read_matrix(&args.estimate)?;
    let h = read_matrix(&args.abundances)?;
    let x = read_matrix(&args.input)?;
    let w_true = read_matrix(&args.truth)?;
    let x_hat = w.matmul(&h)?;
    let report = evaluate(&w, &w_true, &x, &x_hat)?.with_tag(args.tag.clone(), 0.0);
    let text = match cfg.output_format {
        OutputFormat::Json => report.to_json()? + "\n",
        OutputFormat::Csv => report_csv(&report),
    };
    match &args.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
