//! Comparison methods: minimum-volume NMF with a logdet penalty, plain
//! simplex-constrained NMF, and SNPA used directly as an unmixing method.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{NcaaError, Result};
use crate::fpgm::{minimize, residual_sq, Constraint, FpgmConfig, Quadratic};
use crate::linalg::DenseMatrix;
use crate::projections::EpsSimplexSpec;
use crate::selection::snpa;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinVolConfig {
    pub lambda: f64,
    pub logdet_delta: f64,
    pub max_iterations: usize,
    pub inner_iterations: usize,
    /// Re-balance `λ̃` at every outer iteration instead of once.
    pub recompute_lambda: bool,
    /// Stop when an outer iteration lowers the objective by less than this
    /// fraction of its value.
    pub tolerance: f64,
}

impl Default for MinVolConfig {
    fn default() -> Self {
        MinVolConfig {
            lambda: 0.01,
            logdet_delta: 0.1,
            max_iterations: 500,
            inner_iterations: 100,
            recompute_lambda: false,
            tolerance: 1e-9,
        }
    }
}

impl MinVolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(NcaaError::Config("lambda must be > 0".into()));
        }
        self.validate_common()
    }

    fn validate_common(&self) -> Result<()> {
        if !(self.logdet_delta > 0.0 && self.logdet_delta.is_finite()) {
            return Err(NcaaError::Config("logdet_delta must be > 0".into()));
        }
        if self.max_iterations == 0 || self.inner_iterations == 0 {
            return Err(NcaaError::Config("iteration counts must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(NcaaError::Config("tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinVolModel {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
    pub config: MinVolConfig,
    /// Penalized objective after initialization and after each iteration.
    pub trace: Vec<f64>,
    pub lambda_tilde: f64,
}

impl MinVolModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `log det(WᵀW + δI)`.
pub fn logdet_penalty(w: &DenseMatrix, delta: f64) -> Result<f64> {
    Ok(regularized_gram(w, delta).spd_logdet_inverse()?.0)
}

/// Gradient of [`logdet_penalty`] in `W`: `2 W (WᵀW + δI)⁻¹`.
pub fn logdet_gradient(w: &DenseMatrix, delta: f64) -> Result<DenseMatrix> {
    let (_, inv) = regularized_gram(w, delta).spd_logdet_inverse()?;
    Ok(w.matmul(&inv)?.scaled(2.0))
}

fn regularized_gram(w: &DenseMatrix, delta: f64) -> DenseMatrix {
    let mut g = w.gram();
    for i in 0..g.rows() {
        g.set(i, i, g.get(i, i) + delta);
    }
    g
}

/// `λ̃ = λ ‖X − WH‖² / |log det(WᵀW + δI)|`. The logdet is usually negative
/// for normalized data; its magnitude keeps the penalty volume-shrinking.
fn balance_lambda(lambda: f64, residual: f64, logdet: f64) -> f64 {
    if logdet.abs() > 1e-12 {
        lambda * residual / logdet.abs()
    } else {
        lambda * residual
    }
}

/// Initial factors shared by the NMF baselines: SNPA columns and their
/// simplex-constrained coefficients.
fn snpa_start(x: &DenseMatrix, r: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    if x.min_value() < 0.0 {
        return Err(NcaaError::Config("data must be nonnegative".into()));
    }
    let out = snpa(x, r)?;
    if out.truncated {
        return Err(NcaaError::Config(format!(
            "SNPA found only {} of {r} columns; the data has lower rank",
            out.indices.len()
        )));
    }
    Ok((x.select_columns(&out.indices), out.h))
}

fn update_h(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix, cfg: &FpgmConfig) -> Result<DenseMatrix> {
    let q = Quadratic::for_h(x, w)?;
    let spec = EpsSimplexSpec::subsimplex(w.cols());
    Ok(minimize(&q, &Constraint::Columns(spec), h, cfg)?.solution)
}

/// Minimizes `‖X − WH‖²_F + λ̃ log det(WᵀW + δI)` over `W ≥ 0` and `H` with
/// columns in `Δ^r`, starting from SNPA.
///
/// Each `W` step minimizes the quadratic majorizer
/// `‖X − WH‖² + λ̃ tr(W P Wᵀ)`, `P = (W₀ᵀW₀ + δI)⁻¹`, by projected fast
/// gradient; each `H` step is a simplex-constrained fast gradient solve. A step
/// that does not lower the objective is discarded.
pub fn minvol_nmf(x: &DenseMatrix, r: usize, cfg: &MinVolConfig) -> Result<MinVolModel> {
    cfg.validate()?;
    run_minvol(x, r, cfg)
}

/// Simplex-constrained NMF (`λ = 0`) with the same initialization and updates.
pub fn simplex_nmf(x: &DenseMatrix, r: usize, cfg: &MinVolConfig) -> Result<MinVolModel> {
    cfg.validate_common()?;
    run_minvol(x, r, &MinVolConfig { lambda: 0.0, ..cfg.clone() })
}

fn run_minvol(x: &DenseMatrix, r: usize, cfg: &MinVolConfig) -> Result<MinVolModel> {
    let (mut w, h0) = snpa_start(x, r)?;
    let inner = FpgmConfig::with_iterations(cfg.inner_iterations);
    let mut h = update_h(x, &w, &h0, &inner)?;
    let delta = cfg.logdet_delta;

    let mut residual = residual_sq(x, &w, &h)?;
    let (mut logdet, mut p) = regularized_gram(&w, delta).spd_logdet_inverse()?;
    let mut lambda_tilde = balance_lambda(cfg.lambda, residual, logdet);
    let mut objective = residual + lambda_tilde * logdet;
    let mut trace = vec![objective];
    let xnorm = x.fro_norm_sq();

    for it in 1..=cfg.max_iterations {
        if cfg.recompute_lambda && it > 1 {
            lambda_tilde = balance_lambda(cfg.lambda, residual, logdet);
            objective = residual + lambda_tilde * logdet;
        }
        let hht = h.matmul_t(&h)?;
        let right = hht.add(&p.scaled(lambda_tilde))?;
        let q = Quadratic::new(None, Some(right), x.matmul_t(&h)?, xnorm)?;
        let w_next = minimize(&q, &Constraint::Nonnegative, &w, &inner)?.solution;
        let h_next = update_h(x, &w_next, &h, &inner)?;

        let res_next = residual_sq(x, &w_next, &h_next)?;
        let (ld_next, p_next) = regularized_gram(&w_next, delta).spd_logdet_inverse()?;
        let obj_next = res_next + lambda_tilde * ld_next;
        if !obj_next.is_finite() {
            return Err(NcaaError::NumericFailure {
                iteration: it,
                detail: "minvol objective is not finite".into(),
            });
        }
        let previous = objective;
        if obj_next <= objective {
            w = w_next;
            h = h_next;
            residual = res_next;
            logdet = ld_next;
            p = p_next;
            objective = obj_next;
        }
        trace.push(objective);
        if previous - objective <= cfg.tolerance * previous.abs() {
            debug!("minvol stopped after {it} iterations at {objective:.6e}");
            break;
        }
    }

    Ok(MinVolModel {
        w,
        h,
        config: cfg.clone(),
        trace,
        lambda_tilde,
    })
}

/// SNPA as an unmixing method: `W` is `r` columns of `X`, `H` their
/// simplex-constrained coefficients.
pub fn snpa_unmix(x: &DenseMatrix, r: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    let (w, h0) = snpa_start(x, r)?;
    let h = update_h(x, &w, &h0, &FpgmConfig::default())?;
    Ok((w, h))
}
