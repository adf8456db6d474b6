//! Benchmark sweep over `(purity, rank, noise)` cells.
//!
//! Trials run on a rayon pool; results are collected in task order so the
//! per-trial CSV does not depend on scheduling. Wall times go to a separate
//! file for the same reason.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use ncaa_core::baselines::{minvol_nmf, snpa_unmix, MinVolConfig};
use ncaa_core::evaluation::{evaluate, EvalReport};
use ncaa_core::selection::{select, SelectionMethod};
use ncaa_core::solver::{fine_tune, tune_epsilon, TunerConfig};
use ncaa_core::synthdata::{generate, SyntheticInstance, SyntheticSpec, BENCHMARK_GRID};
use ncaa_core::{DenseMatrix, NcaaError};

use crate::commands::{prepare_out_dir, write_json};
use crate::config::{CommonArgs, RunConfig, SyntheticArgs, TunerArgs};
use crate::{CliError, CliResult};

pub const TRIALS_HEADER: &str = "purity,rank,noise,trial,method,status,mrsa_average,rel_error";
pub const TIMINGS_HEADER: &str = "purity,rank,noise,trial,method,wall_time";
pub const SUMMARY_HEADER: &str = "purity,rank,noise,method,trials_ok,failures,mrsa_mean,mrsa_std,rel_error_mean,best_count";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchMethod {
    Ncaa,
    Snpa,
    Minvol,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Cells as `purity,rank,noise` separated by `;`. Defaults to the
    /// standard 11-cell grid, or to the single cell given by
    /// --purity/--rank/--noise.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [BenchMethod::Ncaa, BenchMethod::Snpa, BenchMethod::Minvol])]
    pub methods: Vec<BenchMethod>,
    /// MinVolNMF penalty weights; one method column per value.
    #[arg(long = "lambda", value_delimiter = ',', default_values_t = [0.01, 0.1])]
    pub lambdas: Vec<f64>,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[command(flatten)]
    pub tuner: TunerArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub purity: f64,
    pub rank: usize,
    pub noise: f64,
}

impl Cell {
    fn key(&self) -> String {
        format!("{},{},{}", self.purity, self.rank, self.noise)
    }

    /// Seed for this cell's instances. Mixing the cell into the seed keeps
    /// instances of different cells independent while a cell always gets the
    /// same data whatever grid it appears in.
    fn seed(&self, base: u64) -> u64 {
        let mut h = base ^ 0x9E37_79B9_7F4A_7C15;
        for word in [self.purity.to_bits(), self.rank as u64, self.noise.to_bits()] {
            h = (h ^ word).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            h ^= h >> 31;
        }
        h
    }
}

pub fn parse_grid(text: &str) -> CliResult<Vec<Cell>> {
    let mut cells = Vec::new();
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(',').map(str::trim).collect();
        let bad = || CliError::config(format!("grid cell {part:?} is not purity,rank,noise"));
        if fields.len() != 3 {
            return Err(bad());
        }
        cells.push(Cell {
            purity: fields[0].parse().map_err(|_| bad())?,
            rank: fields[1].parse().map_err(|_| bad())?,
            noise: fields[2].parse().map_err(|_| bad())?,
        });
    }
    if cells.is_empty() {
        return Err(CliError::config("empty grid"));
    }
    Ok(cells)
}

#[derive(Clone, Debug)]
enum Solver {
    Ncaa,
    Snpa,
    Minvol(MinVolConfig),
}

#[derive(Clone, Debug)]
struct MethodSpec {
    tag: String,
    solver: Solver,
}

struct Plan {
    cells: Vec<Cell>,
    methods: Vec<MethodSpec>,
    base: SyntheticSpec,
    tuner: TunerConfig,
    selector: SelectionMethod,
    anchors: Option<usize>,
    fine: bool,
    seed: u64,
}

#[derive(Clone, Debug)]
pub struct TrialRow {
    pub cell: usize,
    pub trial: usize,
    pub method: String,
    pub outcome: Result<(f64, f64), String>,
    pub wall_time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub purity: f64,
    pub rank: usize,
    pub noise: f64,
    pub method: String,
    pub trials_ok: usize,
    pub failures: usize,
    pub mrsa_mean: f64,
    pub mrsa_std: f64,
    pub rel_error_mean: f64,
    pub best_count: usize,
}

fn error_tag(err: &NcaaError) -> String {
    let kind = match err {
        NcaaError::Shape { .. } => "shape",
        NcaaError::NonFinite { .. } => "non-finite",
        NcaaError::Config(_) => "config",
        NcaaError::NumericFailure { .. } => "numeric",
        NcaaError::UndefinedMetric(_) => "undefined-metric",
        NcaaError::Generation { .. } => "generation",
        NcaaError::Parse { .. } => "parse",
        NcaaError::Io(_) => "io",
        NcaaError::Serde(_) => "serde",
    };
    let detail: String = err
        .to_string()
        .chars()
        .map(|c| if c == ',' || c == '\n' || c == '"' { ' ' } else { c })
        .collect();
    format!("error:{kind}:{detail}")
}

fn run_method(plan: &Plan, method: &MethodSpec, inst: &SyntheticInstance, r: usize) -> Result<EvalReport, NcaaError> {
    let x = &inst.x;
    let (w, h): (DenseMatrix, DenseMatrix) = match &method.solver {
        Solver::Ncaa => {
            let d = plan.anchors.unwrap_or(10 * r);
            let y = select(x, d, plan.selector)?.y;
            let mut model = tune_epsilon(x, &y, r, &plan.tuner)?;
            if plan.fine {
                model = fine_tune(x, &y, &model, &plan.tuner)?;
            }
            (model.archetypes(), model.h)
        }
        Solver::Snpa => snpa_unmix(x, r)?,
        Solver::Minvol(cfg) => {
            let model = minvol_nmf(x, r, cfg)?;
            (model.w, model.h)
        }
    };
    let x_hat = w.matmul(&h)?;
    evaluate(&w, &inst.w_true, x, &x_hat)
}

fn run_task(plan: &Plan, cell_index: usize, trial: usize) -> Vec<TrialRow> {
    let cell = plan.cells[cell_index];
    let spec = SyntheticSpec {
        purity: cell.purity,
        r: cell.rank,
        noise: cell.noise,
        seed: cell.seed(plan.seed),
        ..plan.base.clone()
    };
    let instance = generate(&spec, trial).map_err(|e| error_tag(&e));
    let rows = plan
        .methods
        .iter()
        .map(|method| {
            let start = Instant::now();
            let outcome = match &instance {
                Ok(inst) => run_method(plan, method, inst, cell.rank)
                    .map(|rep| (rep.mrsa_average, rep.rel_error))
                    .map_err(|e| error_tag(&e)),
                Err(tag) => Err(tag.clone()),
            };
            TrialRow {
                cell: cell_index,
                trial,
                method: method.tag.clone(),
                outcome,
                wall_time: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    info!("cell ({}) trial {trial} done", cell.key());
    rows
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregates per-trial rows into one row per (cell, method). A trial counts
/// as a win for every method that reaches the lowest MRSA in it.
pub fn summarize(cells: &[Cell], methods: &[String], rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        let in_cell: Vec<&TrialRow> = rows.iter().filter(|r| r.cell == ci).collect();
        let mut trials: Vec<usize> = in_cell.iter().map(|r| r.trial).collect();
        trials.dedup();
        let mut best = vec![0usize; methods.len()];
        for &t in &trials {
            let scores: Vec<Option<f64>> = methods
                .iter()
                .map(|m| {
                    in_cell
                        .iter()
                        .find(|r| r.trial == t && &r.method == m)
                        .and_then(|r| r.outcome.as_ref().ok().map(|o| o.0))
                })
                .collect();
            let low = scores.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            for (k, s) in scores.iter().enumerate() {
                if *s == Some(low) {
                    best[k] += 1;
                }
            }
        }
        for (k, m) in methods.iter().enumerate() {
            let ok: Vec<(f64, f64)> = in_cell
                .iter()
                .filter(|r| &r.method == m)
                .filter_map(|r| r.outcome.as_ref().ok().copied())
                .collect();
            let failures = in_cell.iter().filter(|r| &r.method == m && r.outcome.is_err()).count();
            let mrsa: Vec<f64> = ok.iter().map(|o| o.0).collect();
            let rel: Vec<f64> = ok.iter().map(|o| o.1).collect();
            let (mrsa_mean, mrsa_std) = mean_std(&mrsa);
            out.push(SummaryRow {
                purity: cell.purity,
                rank: cell.rank,
                noise: cell.noise,
                method: m.clone(),
                trials_ok: ok.len(),
                failures,
                mrsa_mean,
                mrsa_std,
                rel_error_mean: mean_std(&rel).0,
                best_count: best[k],
            });
        }
    }
    out
}

fn trials_csv(cells: &[Cell], rows: &[TrialRow]) -> String {
    let mut s = String::from(TRIALS_HEADER);
    s.push('\n');
    for r in rows {
        let cell = cells[r.cell].key();
        let _ = match &r.outcome {
            Ok((mrsa, rel)) => writeln!(s, "{cell},{},{},ok,{mrsa},{rel}", r.trial, r.method),
            Err(tag) => writeln!(s, "{cell},{},{},{tag},,", r.trial, r.method),
        };
    }
    s
}

fn timings_csv(cells: &[Cell], rows: &[TrialRow]) -> String {
    let mut s = String::from(TIMINGS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", cells[r.cell].key(), r.trial, r.method, r.wall_time);
    }
    s
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.purity,
            r.rank,
            r.noise,
            r.method,
            r.trials_ok,
            r.failures,
            r.mrsa_mean,
            r.mrsa_std,
            r.rel_error_mean,
            r.best_count
        );
    }
    s
}

fn print_table(rows: &[SummaryRow]) {
    let mut last = None;
    for r in rows {
        let key = (r.purity.to_bits(), r.rank, r.noise.to_bits());
        if last != Some(key) {
            println!("(p, r, noise) = ({}, {}, {})", r.purity, r.rank, r.noise);
            last = Some(key);
        }
        let failed = if r.failures > 0 {
            format!("  [{} failed]", r.failures)
        } else {
            String::new()
        };
        println!(
            "  {:<14} {:>10.4} ± {:<10.4} ({}){failed}",
            r.method, r.mrsa_mean, r.mrsa_std, r.best_count
        );
    }
}

fn build_plan(mut cfg: RunConfig, args: &BenchArgs) -> CliResult<Plan> {
    cfg.apply_common(&args.common);
    cfg.apply_tuner(&args.tuner);
    cfg.apply_synthetic(&args.synthetic);
    cfg.validate()?;

    let cells = match &args.grid {
        Some(text) => parse_grid(text)?,
        None if args.synthetic.purity.is_some() || args.synthetic.rank.is_some() || args.synthetic.noise.is_some() => {
            vec![Cell {
                purity: cfg.synthetic.purity,
                rank: cfg.synthetic.r,
                noise: cfg.synthetic.noise,
            }]
        }
        None => BENCHMARK_GRID
            .iter()
            .map(|&(purity, rank, noise)| Cell { purity, rank, noise })
            .collect(),
    };
    for c in &cells {
        SyntheticSpec {
            purity: c.purity,
            r: c.rank,
            noise: c.noise,
            ..cfg.synthetic.clone()
        }
        .validate()?;
        if let Some(d) = cfg.anchors {
            if c.rank > d {
                return Err(CliError::config(format!("rank {} exceeds the number of anchors {d}", c.rank)));
            }
        }
    }
    if cfg.synthetic.trials == 0 {
        return Err(CliError::config("trials must be >= 1"));
    }

    let mut methods = Vec::new();
    for m in &args.methods {
        match m {
            BenchMethod::Ncaa => methods.push(MethodSpec {
                tag: "ncaa".into(),
                solver: Solver::Ncaa,
            }),
            BenchMethod::Snpa => methods.push(MethodSpec {
                tag: "snpa".into(),
                solver: Solver::Snpa,
            }),
            BenchMethod::Minvol => {
                for &lambda in &args.lambdas {
                    let mc = MinVolConfig {
                        lambda,
                        ..cfg.minvol.clone()
                    };
                    mc.validate()?;
                    methods.push(MethodSpec {
                        tag: format!("minvol({lambda})"),
                        solver: Solver::Minvol(mc),
                    });
                }
            }
        }
    }
    if methods.is_empty() {
        return Err(CliError::config("no methods selected"));
    }
    let mut seen = std::collections::HashSet::new();
    if !methods.iter().all(|m| seen.insert(m.tag.clone())) {
        return Err(CliError::config("duplicate methods"));
    }

    Ok(Plan {
        cells,
        methods,
        tuner: cfg.tuner.clone(),
        selector: cfg.selector.unwrap_or(SelectionMethod::Snpa),
        anchors: cfg.anchors,
        fine: cfg.fine_tune.unwrap_or(false),
        seed: cfg.seed,
        base: cfg.synthetic,
    })
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    seed: u64,
    trials: usize,
    m: usize,
    n: usize,
    dirichlet_alpha: f64,
    rows: &'a [SummaryRow],
}

pub fn run(cfg: RunConfig, args: &BenchArgs) -> CliResult<()> {
    let threads = args.common.threads.unwrap_or(cfg.threads);
    let plan = build_plan(cfg, args)?;
    prepare_out_dir(&args.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;

    let tasks: Vec<(usize, usize)> = (0..plan.cells.len())
        .flat_map(|c| (0..plan.base.trials).map(move |t| (c, t)))
        .collect();
    info!("{} tasks on {} threads", tasks.len(), pool.current_num_threads());
    let rows: Vec<TrialRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, t)| run_task(&plan, c, t))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });

    let tags: Vec<String> = plan.methods.iter().map(|m| m.tag.clone()).collect();
    let summary = summarize(&plan.cells, &tags, &rows);
    fs::write(args.out.join("trials.csv"), trials_csv(&plan.cells, &rows))?;
    fs::write(args.out.join("timings.csv"), timings_csv(&plan.cells, &rows))?;
    fs::write(args.out.join("summary.csv"), summary_csv(&summary))?;
    write_json(
        &args.out.join("summary.json"),
        &SummaryFile {
            seed: plan.seed,
            trials: plan.base.trials,
            m: plan.base.m,
            n: plan.base.n,
            dirichlet_alpha: plan.base.dirichlet_alpha,
            rows: &summary,
        },
    )?;
    print_table(&summary);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(cell: usize, trial: usize, method: &str, mrsa: Option<f64>) -> TrialRow {
        TrialRow {
            cell,
            trial,
            method: method.into(),
            outcome: mrsa.map(|v| (v, 0.1)).ok_or_else(|| "error:numeric:x".to_string()),
            wall_time: 0.0,
        }
    }

    #[test]
    fn grid_parsing() {
        let cells = parse_grid("0.8,7,0; 1,3,0.05").unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[1].rank, 3);
        assert_eq!(cells[1].noise, 0.05);
        assert!(parse_grid("0.8,7").is_err());
        assert!(parse_grid("a,b,c").is_err());
        assert!(parse_grid(" ; ").is_err());
    }

    #[test]
    fn cell_seeds_differ_and_are_stable() {
        let a = Cell {
            purity: 0.8,
            rank: 7,
            noise: 0.0,
        };
        let b = Cell { noise: 0.01, ..a };
        assert_eq!(a.seed(3), a.seed(3));
        assert_ne!(a.seed(3), b.seed(3));
        assert_ne!(a.seed(3), a.seed(4));
    }

    #[test]
    fn summary_counts_and_statistics() {
        let cells = [Cell {
            purity: 0.8,
            rank: 3,
            noise: 0.0,
        }];
        let methods = vec!["a".to_string(), "b".to_string()];
        let rows = vec![
            row(0, 0, "a", Some(1.0)),
            row(0, 0, "b", Some(2.0)),
            row(0, 1, "a", Some(3.0)),
            row(0, 1, "b", Some(3.0)),
            row(0, 2, "a", None),
            row(0, 2, "b", Some(5.0)),
        ];
        let s = summarize(&cells, &methods, &rows);
        assert_eq!((s[0].trials_ok, s[0].failures, s[0].best_count), (2, 1, 2));
        assert_eq!((s[1].trials_ok, s[1].failures, s[1].best_count), (3, 0, 2));
        assert_eq!(s[0].mrsa_mean, 2.0);
        assert!((s[0].mrsa_std - 2f64.sqrt()).abs() < 1e-15);
        assert!((s[1].mrsa_mean - 10.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_trial_has_zero_std() {
        assert_eq!(mean_std(&[4.5]), (4.5, 0.0));
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn error_tags_stay_in_one_field() {
        let tag = error_tag(&NcaaError::Config("a, b\nc".into()));
        assert!(tag.starts_with("error:config:"));
        assert!(!tag.contains(',') && !tag.contains('\n'));
    }
}
