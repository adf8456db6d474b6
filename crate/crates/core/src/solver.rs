//! Near-convex archetypal analysis solver.
//!
//! Minimizes `‖X − YAH‖²_F` over `A` (columns sum to one, entries `≥ -ε`)
//! and `H` (columns in `Δ^r`) by two-block coordinate descent, with an outer
//! loop that tunes `ε` by doubling and bisection, and an optional per-column
//! pass that pulls each archetype back toward the hull of `Y` while the error
//! stays within a fixed budget.
//!
//! With `Y = X` and `ε = 0` the constraint sets are exactly those of classic
//! archetypal analysis; with `Y` square and `ε` large the model approaches
//! simplex-constrained NMF.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{NcaaError, Result};
use crate::fpgm::{fpgm_solve_with_gram, residual_sq, FpgmConfig, SubproblemKind};
use crate::linalg::DenseMatrix;
use crate::projections::{project_columns_in_place, project_in_place, EpsSimplexSpec, SumMode};
use crate::selection::snpa;

/// Errors below this fraction of `‖X‖²_F` are treated as exact fits when
/// comparing block errors (rounding noise would otherwise drive the ε search).
pub const EXACT_FIT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerConfig {
    pub eps_min: f64,
    pub eps_max: f64,
    pub delta: f64,
    pub block_size: usize,
    pub max_outer: usize,
    pub eps_gap_tol: f64,
    pub fine_alpha: f64,
    pub fine_budget: f64,
    pub fine_max_rounds: usize,
    pub fpgm: FpgmConfig,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            eps_min: 1e-3,
            eps_max: 0.5,
            delta: 1e-4,
            block_size: 50,
            max_outer: 20,
            eps_gap_tol: 1e-4,
            fine_alpha: 0.8,
            fine_budget: 1.01,
            fine_max_rounds: 50,
            fpgm: FpgmConfig::default(),
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(NcaaError::Config(msg.to_string()));
        if !(self.eps_min > 0.0 && self.eps_min < self.eps_max && self.eps_max.is_finite()) {
            return fail("need 0 < eps_min < eps_max");
        }
        if !(self.delta >= 0.0) {
            return fail("delta must be >= 0");
        }
        if self.block_size == 0 || self.max_outer == 0 {
            return fail("block_size and max_outer must be >= 1");
        }
        if !(self.fine_alpha > 0.0 && self.fine_alpha < 1.0) {
            return fail("fine_alpha must lie in (0, 1)");
        }
        if !(self.fine_budget > 1.0) {
            return fail("fine_budget must be > 1");
        }
        if !(self.eps_gap_tol >= 0.0) {
            return fail("eps_gap_tol must be >= 0");
        }
        self.fpgm.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub block: usize,
    pub objective: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPoint {
    pub outer: usize,
    pub epsilon: f64,
}

/// Objective at the start and end of one coordinate-descent block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub epsilon: f64,
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NcaaModel {
    pub y: DenseMatrix,
    pub a: DenseMatrix,
    pub h: DenseMatrix,
    /// Lower bound `-ε_l` on column `l` of `A`.
    pub epsilons: Vec<f64>,
    /// Squared error after every coordinate-descent round; `block` 0 is the
    /// initialization.
    pub error_trace: Vec<TracePoint>,
    pub epsilon_trace: Vec<EpsilonPoint>,
    pub blocks: Vec<BlockRecord>,
    /// ε values accepted for each column during fine tuning, in order.
    #[serde(default)]
    pub fine_trace: Vec<Vec<f64>>,
    /// `‖X − YAH‖²_F` of the returned factors.
    pub final_error: f64,
}

impl NcaaModel {
    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    /// `W = YA`.
    pub fn archetypes(&self) -> DenseMatrix {
        archetypes(self)
    }

    pub fn relative_error(&self, x: &DenseMatrix) -> Result<f64> {
        let err = residual_sq(x, &self.archetypes(), &self.h)?;
        Ok((err / x.fro_norm_sq()).sqrt())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `W = YA`.
pub fn archetypes(model: &NcaaModel) -> DenseMatrix {
    model
        .y
        .matmul(&model.a)
        .expect("model factors are conformable")
}

/// `Z(:,j) = Y(:,j) + dε (Y(:,j) − ȳ)`: the convex hull of the columns of `Z`
/// equals the set of near-convex combinations of the columns of `Y`.
pub fn expand_to_z(y: &DenseMatrix, eps: f64) -> DenseMatrix {
    let mean = y.column_mean();
    let factor = y.cols() as f64 * eps;
    let mut z = y.clone();
    for j in 0..y.cols() {
        for (zi, mi) in z.col_mut(j).iter_mut().zip(&mean) {
            *zi += factor * (*zi - mi);
        }
    }
    z
}

/// Weights `b_j = (a_j + ε)/(1 + dε)` on the columns of `Z` that reproduce
/// `Ya`. A near-convex `a` maps into the unit simplex.
pub fn hull_weights(a: &[f64], eps: f64) -> Vec<f64> {
    let scale = 1.0 + a.len() as f64 * eps;
    a.iter().map(|v| (v + eps) / scale).collect()
}

/// Inverse of [`hull_weights`]: `a_j = b_j (1 + dε) − ε`.
pub fn near_convex_weights(b: &[f64], eps: f64) -> Vec<f64> {
    let scale = 1.0 + b.len() as f64 * eps;
    b.iter().map(|v| v * scale - eps).collect()
}

/// Result of one coordinate-descent block.
#[derive(Clone, Debug)]
pub struct BlockOutcome {
    pub a: DenseMatrix,
    pub h: DenseMatrix,
    /// Error of the (projected) starting point.
    pub start_error: f64,
    /// Error after each round.
    pub trace: Vec<f64>,
}

impl BlockOutcome {
    pub fn end_error(&self) -> f64 {
        self.trace.last().copied().unwrap_or(self.start_error)
    }
}

/// Shared state for repeated blocks on the same `(X, Y)`.
struct Problem<'a> {
    x: &'a DenseMatrix,
    y: &'a DenseMatrix,
    yty: DenseMatrix,
    fpgm: &'a FpgmConfig,
}

impl<'a> Problem<'a> {
    fn new(x: &'a DenseMatrix, y: &'a DenseMatrix, fpgm: &'a FpgmConfig) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(NcaaError::shape(
                "ncaa",
                format!("X has {} rows but Y has {}", x.rows(), y.rows()),
            ));
        }
        Ok(Problem {
            x,
            y,
            yty: y.gram(),
            fpgm,
        })
    }

    fn error(&self, a: &DenseMatrix, h: &DenseMatrix) -> Result<f64> {
        residual_sq(self.x, &self.y.matmul(a)?, h)
    }

    fn update_h(&self, a: &DenseMatrix, h: &DenseMatrix) -> Result<DenseMatrix> {
        let spec = EpsSimplexSpec::subsimplex(a.cols());
        let (h, _) = fpgm_solve_with_gram(
            SubproblemKind::UpdateH,
            self.x,
            self.y,
            &self.yty,
            a,
            h,
            &spec,
            self.fpgm,
        )?;
        Ok(h)
    }

    /// Runs `rounds` alternations. `column` restricts the `A` update to one
    /// column. Each round is kept only if it does not increase the error.
    fn block(
        &self,
        a: &DenseMatrix,
        h: &DenseMatrix,
        eps: f64,
        rounds: usize,
        column: Option<usize>,
    ) -> Result<BlockOutcome> {
        let d = self.y.cols();
        let spec = EpsSimplexSpec::near_convex(d, eps)?;
        let mut a = a.clone();
        match column {
            None => project_columns_in_place(&mut a, &spec)?,
            Some(l) => project_in_place(a.col_mut(l), eps, SumMode::EqualOne, &mut Vec::new()),
        }
        let mut h = h.clone();
        project_columns_in_place(&mut h, &EpsSimplexSpec::subsimplex(a.cols()))?;
        let start_error = self.error(&a, &h)?;
        let mut current = start_error;
        let mut trace = Vec::with_capacity(rounds);
        let kind = match column {
            None => SubproblemKind::UpdateA,
            Some(l) => SubproblemKind::UpdateAColumn(l),
        };
        for _ in 0..rounds {
            let (a_next, _) =
                fpgm_solve_with_gram(kind, self.x, self.y, &self.yty, &h, &a, &spec, self.fpgm)?;
            let h_next = self.update_h(&a_next, &h)?;
            let err = self.error(&a_next, &h_next)?;
            if !err.is_finite() {
                return Err(NcaaError::NumericFailure {
                    iteration: trace.len(),
                    detail: "block error is not finite".into(),
                });
            }
            if err <= current {
                a = a_next;
                h = h_next;
                current = err;
            }
            trace.push(current);
        }
        Ok(BlockOutcome {
            a,
            h,
            start_error,
            trace,
        })
    }
}

/// Initial factors: `A0` selects `r` columns of `Y` (picked by SNPA on `Y`),
/// `H0` is the simplex-constrained fit starting from uniform weights.
pub fn init_factors(
    x: &DenseMatrix,
    y: &DenseMatrix,
    r: usize,
    fpgm: &FpgmConfig,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let d = y.cols();
    if r == 0 || d < r {
        return Err(NcaaError::Config(format!(
            "rank {r} needs at least that many anchor columns, Y has {d}"
        )));
    }
    let problem = Problem::new(x, y, fpgm)?;
    let mut picks = snpa(y, r)?.indices;
    // degenerate Y: complete with the first unused columns
    for j in 0..d {
        if picks.len() == r {
            break;
        }
        if !picks.contains(&j) {
            picks.push(j);
        }
    }
    let mut a0 = DenseMatrix::zeros(d, r);
    for (k, &j) in picks.iter().enumerate() {
        a0.set(j, k, 1.0);
    }
    let uniform = DenseMatrix::filled(r, x.cols(), 1.0 / r as f64);
    let h0 = problem.update_h(&a0, &uniform)?;
    Ok((a0, h0))
}

/// `block_size` rounds of (update `A` over the ε-simplex, update `H` over `Δ^r`).
pub fn bcd_block(
    x: &DenseMatrix,
    y: &DenseMatrix,
    a: &DenseMatrix,
    h: &DenseMatrix,
    eps: f64,
    block_size: usize,
    fpgm: &FpgmConfig,
) -> Result<BlockOutcome> {
    Problem::new(x, y, fpgm)?.block(a, h, eps, block_size, None)
}

/// Same as [`bcd_block`] but only column `l` of `A` moves (bounded below by
/// `-eps`); the other columns keep their values.
#[allow(clippy::too_many_arguments)]
pub fn bcd_block_column(
    x: &DenseMatrix,
    y: &DenseMatrix,
    a: &DenseMatrix,
    h: &DenseMatrix,
    l: usize,
    eps: f64,
    block_size: usize,
    fpgm: &FpgmConfig,
) -> Result<BlockOutcome> {
    if l >= a.cols() {
        return Err(NcaaError::shape("bcd_block_column", "column index out of range"));
    }
    Problem::new(x, y, fpgm)?.block(a, h, eps, block_size, Some(l))
}

struct Candidate {
    eps: f64,
    error: f64,
    a: DenseMatrix,
    h: DenseMatrix,
}

/// Tunes a single ε for all columns.
///
/// Starting at `eps_min`, each outer step runs one block. If the block
/// improved the error by at least `delta · err(0)`, ε doubles (capped at the
/// current upper bound); otherwise the upper bound drops to ε and the next ε
/// bisects the bracket. The search stops when the bracket collapses or
/// `max_outer` blocks have run. Among all block-end models, the returned one
/// has the smallest ε whose error is within `delta · err(0)` of the lowest
/// error observed.
pub fn tune_epsilon(x: &DenseMatrix, y: &DenseMatrix, r: usize, cfg: &TunerConfig) -> Result<NcaaModel> {
    cfg.validate()?;
    let problem = Problem::new(x, y, &cfg.fpgm)?;
    let (mut a, mut h) = init_factors(x, y, r, &cfg.fpgm)?;
    let err0 = problem.error(&a, &h)?;
    let reference = err0.max(EXACT_FIT_FLOOR * x.fro_norm_sq());
    let threshold = cfg.delta * reference;

    let mut error_trace = vec![TracePoint {
        block: 0,
        objective: err0,
    }];
    let mut epsilon_trace = Vec::new();
    let mut blocks = Vec::new();
    let mut candidates: Vec<Candidate> = Vec::new();

    let (mut lo, mut hi) = (cfg.eps_min, cfg.eps_max);
    let mut eps = cfg.eps_min;
    let mut previous_end = err0;
    for outer in 1..=cfg.max_outer {
        let block = problem.block(&a, &h, eps, cfg.block_size, None)?;
        let end = block.end_error();
        let offset = error_trace.len();
        error_trace.extend(block.trace.iter().enumerate().map(|(k, &e)| TracePoint {
            block: offset + k,
            objective: e,
        }));
        epsilon_trace.push(EpsilonPoint {
            outer,
            epsilon: eps,
        });
        blocks.push(BlockRecord {
            epsilon: eps,
            start: block.start_error,
            end,
        });
        a = block.a;
        h = block.h;
        candidates.push(Candidate {
            eps,
            error: end,
            a: a.clone(),
            h: h.clone(),
        });

        let improvement = previous_end - end;
        previous_end = end;
        let next = if improvement < threshold {
            hi = eps;
            0.5 * (lo + hi)
        } else {
            lo = eps;
            (2.0 * eps).min(hi)
        };
        debug!("outer {outer}: eps={eps:.3e} err={end:.6e} improvement={improvement:.3e} bracket=[{lo:.3e}, {hi:.3e}]");
        if hi - lo < cfg.eps_gap_tol * hi {
            break;
        }
        eps = next;
    }

    let lowest = candidates
        .iter()
        .map(|c| c.error)
        .fold(f64::INFINITY, f64::min);
    let chosen = candidates
        .into_iter()
        .filter(|c| c.error <= lowest + threshold)
        .min_by(|p, q| p.eps.total_cmp(&q.eps).then(p.error.total_cmp(&q.error)))
        .expect("at least one block runs");

    Ok(NcaaModel {
        y: y.clone(),
        epsilons: vec![chosen.eps; r],
        a: chosen.a,
        h: chosen.h,
        error_trace,
        epsilon_trace,
        blocks,
        fine_trace: Vec::new(),
        final_error: chosen.error,
    })
}

/// Per-column fine tuning of a model returned by [`tune_epsilon`].
///
/// For each column `l` in turn, `ε_l` starts at `max(0, −min A(:,l))` and is
/// multiplied by `fine_alpha` while a block of single-column `A` updates (with
/// full `H` updates) keeps the error within `fine_budget · err_0`, where
/// `err_0` is the error of the input model. The first shrink that breaks the
/// budget is discarded. A final `H` update finishes the pass.
pub fn fine_tune(x: &DenseMatrix, y: &DenseMatrix, model: &NcaaModel, cfg: &TunerConfig) -> Result<NcaaModel> {
    cfg.validate()?;
    let problem = Problem::new(x, y, &cfg.fpgm)?;
    let r = model.rank();
    let err0 = problem.error(&model.a, &model.h)?;
    let budget = cfg.fine_budget * err0;

    let mut a = model.a.clone();
    let mut h = model.h.clone();
    let mut current = err0;
    let mut epsilons = model.epsilons.clone();
    let mut fine_trace = Vec::with_capacity(r);
    let mut error_trace = model.error_trace.clone();
    let mut blocks = model.blocks.clone();

    for l in 0..r {
        let start = (-a.col(l).iter().copied().fold(f64::INFINITY, f64::min)).max(0.0);
        let mut eps_l = start.min(epsilons[l]);
        let mut trace = vec![eps_l];
        if eps_l > 0.0 {
            for _ in 0..cfg.fine_max_rounds {
                let candidate = cfg.fine_alpha * eps_l;
                let block = problem.block(&a, &h, candidate, cfg.block_size, Some(l))?;
                let end = block.end_error();
                if end > budget {
                    break;
                }
                let offset = error_trace.len();
                error_trace.extend(block.trace.iter().enumerate().map(|(k, &e)| TracePoint {
                    block: offset + k,
                    objective: e,
                }));
                blocks.push(BlockRecord {
                    epsilon: candidate,
                    start: block.start_error,
                    end,
                });
                a = block.a;
                h = block.h;
                current = end;
                eps_l = candidate;
                trace.push(eps_l);
            }
        }
        debug!("fine tune column {l}: eps {start:.3e} -> {eps_l:.3e}, err {current:.6e}");
        epsilons[l] = eps_l;
        fine_trace.push(trace);
    }

    let h_final = problem.update_h(&a, &h)?;
    let err_final = problem.error(&a, &h_final)?;
    if err_final <= current {
        h = h_final;
        current = err_final;
    }

    Ok(NcaaModel {
        y: y.clone(),
        a,
        h,
        epsilons,
        error_trace,
        epsilon_trace: model.epsilon_trace.clone(),
        blocks,
        fine_trace,
        final_error: current,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RngStream;
    use rand::Rng;

    fn simplex_columns(rows: usize, cols: usize, rng: &mut RngStream) -> DenseMatrix {
        let mut m = DenseMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>());
        for j in 0..cols {
            let s: f64 = m.col(j).iter().sum();
            m.col_mut(j).iter_mut().for_each(|v| *v /= s);
        }
        m
    }

    #[test]
    fn expand_to_z_examples() {
        let mut rng = RngStream::new(1, 0);
        let y = DenseMatrix::from_fn(4, 5, |_, _| rng.random::<f64>());
        assert_eq!(expand_to_z(&y, 0.0), y);

        let y1 = DenseMatrix::from_rows(&[[0.0, 1.0]]).unwrap();
        let z = expand_to_z(&y1, 0.5);
        assert_eq!(z.row(0), vec![-0.5, 1.5]);

        let z = expand_to_z(&y, 0.37);
        for (zm, ym) in z.column_mean().iter().zip(y.column_mean()) {
            assert!((zm - ym).abs() < 1e-12);
        }
    }

    #[test]
    fn hull_weights_round_trip() {
        let mut rng = RngStream::new(12, 0);
        let y = DenseMatrix::from_fn(3, 5, |_, _| rng.random::<f64>());
        let eps = 0.2;
        let a = [0.5, -0.2, 0.3, 0.6, -0.2];
        let b = hull_weights(&a, eps);
        assert!(b.iter().all(|&v| v >= 0.0));
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let ya = y.matmul(&DenseMatrix::from_col_major(5, 1, a.to_vec()).unwrap()).unwrap();
        let zb = expand_to_z(&y, eps)
            .matmul(&DenseMatrix::from_col_major(5, 1, b.clone()).unwrap())
            .unwrap();
        assert!(ya.sub(&zb).unwrap().fro_norm() < 1e-12);
        let back = near_convex_weights(&b, eps);
        assert!(back.iter().zip(a).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn init_with_square_anchor_set_is_a_permutation() {
        let mut rng = RngStream::new(2, 0);
        let y = simplex_columns(6, 3, &mut rng);
        let x = y.matmul(&simplex_columns(3, 20, &mut rng)).unwrap();
        let (a0, h0) = init_factors(&x, &y, 3, &FpgmConfig::default()).unwrap();
        for j in 0..3 {
            let col = a0.col(j);
            assert_eq!(col.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(col.iter().sum::<f64>(), 1.0);
        }
        for i in 0..3 {
            assert_eq!(a0.row(i).iter().sum::<f64>(), 1.0);
        }
        assert!(crate::projections::max_column_violation(&h0, &EpsSimplexSpec::subsimplex(3)) <= 1e-12);
    }

    #[test]
    fn init_h_beats_uniform_and_rejects_small_anchor_sets() {
        let mut rng = RngStream::new(3, 0);
        let x = DenseMatrix::from_fn(5, 30, |_, _| rng.random::<f64>());
        let y = x.select_columns(&[0, 3, 5, 7, 9, 11]);
        let cfg = FpgmConfig::default();
        let (a0, h0) = init_factors(&x, &y, 3, &cfg).unwrap();
        let w = y.matmul(&a0).unwrap();
        let uniform = DenseMatrix::filled(3, 30, 1.0 / 3.0);
        assert!(residual_sq(&x, &w, &h0).unwrap() <= residual_sq(&x, &w, &uniform).unwrap());
        assert!(a0.min_value() >= 0.0);
        assert!(matches!(init_factors(&x, &y, 7, &cfg), Err(NcaaError::Config(_))));
    }

    #[test]
    fn block_on_exact_model_is_flat() {
        let mut rng = RngStream::new(4, 0);
        let y = simplex_columns(6, 4, &mut rng);
        let a = DenseMatrix::identity(4).select_columns(&[0, 1, 2]);
        let h = simplex_columns(3, 15, &mut rng).scaled(0.95);
        let x = y.matmul(&a).unwrap().matmul(&h).unwrap();
        let out = bcd_block(&x, &y, &a, &h, 0.01, 5, &FpgmConfig::default()).unwrap();
        assert!(out.start_error < 1e-20);
        assert!(out.trace.iter().all(|&e| e <= out.start_error));
        assert!(out.a.sub(&a).unwrap().fro_norm() < 1e-9);
    }

    #[test]
    fn block_size_one_is_one_round_and_monotone() {
        let mut rng = RngStream::new(5, 0);
        let x = DenseMatrix::from_fn(6, 40, |_, _| rng.random::<f64>());
        let y = x.select_columns(&[1, 4, 9, 16, 25, 36]);
        let cfg = FpgmConfig::default();
        let (a0, h0) = init_factors(&x, &y, 3, &cfg).unwrap();
        let one = bcd_block(&x, &y, &a0, &h0, 0.05, 1, &cfg).unwrap();
        assert_eq!(one.trace.len(), 1);
        let many = bcd_block(&x, &y, &a0, &h0, 0.05, 20, &cfg).unwrap();
        assert!(many.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(many.end_error() <= many.start_error);
        let spec = EpsSimplexSpec::near_convex(6, 0.05).unwrap();
        assert!(crate::projections::max_column_violation(&many.a, &spec) <= 1e-10);
    }

    #[test]
    fn archetypal_analysis_special_case() {
        // Y = X and ε = 0: A columns are convex weights over data points
        let mut rng = RngStream::new(6, 0);
        let x = DenseMatrix::from_fn(4, 12, |_, _| rng.random::<f64>());
        let cfg = FpgmConfig::default();
        let (a0, h0) = init_factors(&x, &x, 3, &cfg).unwrap();
        let out = bcd_block(&x, &x, &a0, &h0, 0.0, 10, &cfg).unwrap();
        assert!(out.a.min_value() >= 0.0);
        for s in out.a.column_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(crate::projections::max_column_violation(&out.h, &EpsSimplexSpec::subsimplex(3)) <= 1e-12);
    }

    #[test]
    fn tuner_config_validation() {
        let mut cfg = TunerConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.eps_min = 0.6;
        assert!(cfg.validate().is_err());
        let cfg = TunerConfig {
            fine_alpha: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TunerConfig {
            fine_budget: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tune_records_initial_error_and_bounded_epsilons() {
        let mut rng = RngStream::new(7, 0);
        let x = DenseMatrix::from_fn(5, 60, |_, _| rng.random::<f64>());
        let y = crate::selection::snpa_select(&x, 9).unwrap().y;
        let cfg = TunerConfig {
            block_size: 10,
            max_outer: 8,
            ..Default::default()
        };
        let model = tune_epsilon(&x, &y, 3, &cfg).unwrap();
        let (a0, h0) = init_factors(&x, &y, 3, &cfg.fpgm).unwrap();
        let err0 = crate::fpgm::objective(&x, &y, &a0, &h0).unwrap();
        assert_eq!(model.error_trace[0].objective, err0);
        assert!(model
            .epsilon_trace
            .iter()
            .all(|p| p.epsilon >= cfg.eps_min && p.epsilon <= cfg.eps_max));
        assert!(model.blocks.iter().all(|b| b.end <= b.start));
        let check = crate::fpgm::objective(&x, &y, &model.a, &model.h).unwrap();
        assert!((check - model.final_error).abs() <= 1e-12 * err0);

        let json = model.to_json().unwrap();
        let back = NcaaModel::from_json(&json).unwrap();
        assert_eq!(back.a, model.a);
        assert_eq!(back.epsilons, model.epsilons);
    }

    #[test]
    fn fine_tune_skips_nonnegative_columns() {
        let mut rng = RngStream::new(8, 0);
        let y = simplex_columns(5, 6, &mut rng);
        let h = simplex_columns(2, 25, &mut rng);
        let a = DenseMatrix::identity(6).select_columns(&[1, 4]);
        let x = y.matmul(&a).unwrap().matmul(&h).unwrap();
        let model = NcaaModel {
            y: y.clone(),
            a: a.clone(),
            h,
            epsilons: vec![0.1, 0.1],
            error_trace: vec![],
            epsilon_trace: vec![],
            blocks: vec![],
            fine_trace: vec![],
            final_error: 0.0,
        };
        let tuned = fine_tune(&x, &y, &model, &TunerConfig::default()).unwrap();
        assert_eq!(tuned.epsilons, vec![0.0, 0.0]);
        assert_eq!(tuned.a, a);
    }
}
