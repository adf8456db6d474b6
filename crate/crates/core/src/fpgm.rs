//! Fast projected gradient method (Nesterov acceleration, backtracking line
//! search, function-value restart) for the convex quadratic subproblems of the
//! block coordinate descent.
//!
//! Each subproblem is written as
//!
//! ```text
//! f(V) = <V, L V R> - 2 <V, C> + κ
//! ```
//!
//! with `L`, `R` symmetric PSD. Updating `A` with `H` fixed uses `L = YᵀY`,
//! `R = HHᵀ`, `C = YᵀXHᵀ`; updating `H` with `W = YA` fixed uses `L = WᵀW`,
//! `R = I`, `C = WᵀX`. In both cases `κ = ‖X‖²_F`, so `f` is exactly the
//! squared residual and an iteration costs `O(d²r + r²n)` after an `O(mnr)`
//! setup.

use serde::{Deserialize, Serialize};

use crate::error::{NcaaError, Result};
use crate::linalg::{psd_max_eigenvalue_upper, DenseMatrix};
use crate::projections::{project_columns_in_place, EpsSimplexSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpgmConfig {
    pub max_iterations: usize,
    pub backtrack_shrink: f64,
    pub backtrack_grow: f64,
    pub restart_on_increase: bool,
    /// Stop once an accepted step moves less than `tolerance` times the
    /// length of the first accepted step. Zero disables the test.
    pub tolerance: f64,
}

impl Default for FpgmConfig {
    fn default() -> Self {
        FpgmConfig {
            max_iterations: 200,
            backtrack_shrink: 0.5,
            backtrack_grow: 1.2,
            restart_on_increase: true,
            tolerance: 1e-4,
        }
    }
}

impl FpgmConfig {
    pub fn with_iterations(max_iterations: usize) -> Self {
        FpgmConfig {
            max_iterations,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(NcaaError::Config("max_iterations must be >= 1".into()));
        }
        if !(self.backtrack_shrink > 0.0 && self.backtrack_shrink < 1.0) {
            return Err(NcaaError::Config("backtrack_shrink must lie in (0, 1)".into()));
        }
        if !(self.backtrack_grow > 1.0) || !self.backtrack_grow.is_finite() {
            return Err(NcaaError::Config("backtrack_grow must be > 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(NcaaError::Config("tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubproblemKind {
    UpdateA,
    UpdateH,
    /// Update one column of `A`, all other columns held fixed.
    UpdateAColumn(usize),
}

/// Feasible set of a subproblem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Constraint {
    /// Every column in the given simplex-type set.
    Columns(EpsSimplexSpec),
    /// Entrywise nonnegativity.
    Nonnegative,
}

impl Constraint {
    pub fn project(&self, v: &mut DenseMatrix) -> Result<()> {
        match self {
            Constraint::Columns(spec) => project_columns_in_place(v, spec),
            Constraint::Nonnegative => {
                v.as_mut_slice().iter_mut().for_each(|x| *x = x.max(0.0));
                Ok(())
            }
        }
    }

    pub fn violation(&self, v: &DenseMatrix) -> f64 {
        match self {
            Constraint::Columns(spec) => crate::projections::max_column_violation(v, spec),
            Constraint::Nonnegative => (-v.min_value()).max(0.0),
        }
    }
}

/// `f(V) = <V, L V R> - 2 <V, C> + κ`; `None` stands for an identity factor.
#[derive(Clone, Debug)]
pub struct Quadratic {
    left: Option<DenseMatrix>,
    right: Option<DenseMatrix>,
    linear: DenseMatrix,
    constant: f64,
    lipschitz: f64,
}

impl Quadratic {
    pub fn new(
        left: Option<DenseMatrix>,
        right: Option<DenseMatrix>,
        linear: DenseMatrix,
        constant: f64,
    ) -> Result<Self> {
        let (rows, cols) = linear.shape();
        if let Some(l) = &left {
            if l.shape() != (rows, rows) {
                return Err(NcaaError::shape("Quadratic::new", "left factor"));
            }
        }
        if let Some(r) = &right {
            if r.shape() != (cols, cols) {
                return Err(NcaaError::shape("Quadratic::new", "right factor"));
            }
        }
        let lmax = left.as_ref().map_or(1.0, psd_max_eigenvalue_upper);
        let rmax = right.as_ref().map_or(1.0, psd_max_eigenvalue_upper);
        Ok(Quadratic {
            left,
            right,
            linear,
            constant,
            lipschitz: 2.0 * lmax * rmax,
        })
    }

    /// Objective in `A` for fixed `H`, given the precomputed Gram matrix `YᵀY`.
    pub fn for_a(x: &DenseMatrix, y: &DenseMatrix, yty: &DenseMatrix, h: &DenseMatrix) -> Result<Self> {
        check_shapes(x, y, None, Some(h))?;
        let xht = x.matmul_t(h)?;
        let linear = y.t_matmul(&xht)?;
        let hht = h.matmul_t(h)?;
        Quadratic::new(Some(yty.clone()), Some(hht), linear, x.fro_norm_sq())
    }

    /// Objective in `H` for fixed archetypes `W = YA`.
    pub fn for_h(x: &DenseMatrix, w: &DenseMatrix) -> Result<Self> {
        if x.rows() != w.rows() {
            return Err(NcaaError::shape("Quadratic::for_h", "X and W row counts differ"));
        }
        let linear = w.t_matmul(x)?;
        Quadratic::new(Some(w.gram()), None, linear, x.fro_norm_sq())
    }

    /// Objective in column `l` of `A`, other columns fixed at their values in `a`.
    pub fn for_a_column(
        x: &DenseMatrix,
        y: &DenseMatrix,
        yty: &DenseMatrix,
        a: &DenseMatrix,
        h: &DenseMatrix,
        l: usize,
    ) -> Result<Self> {
        check_shapes(x, y, Some(a), Some(h))?;
        if l >= a.cols() {
            return Err(NcaaError::shape("Quadratic::for_a_column", "column index out of range"));
        }
        let full = Quadratic::for_a(x, y, yty, h)?;
        let hht = full.right.as_ref().expect("for_a sets the right factor");
        // c = (YᵀXHᵀ)(:,l) - YᵀY Σ_{k≠l} A(:,k) HHᵀ(k,l)
        let mut others = DenseMatrix::zeros(a.rows(), 1);
        for k in (0..a.cols()).filter(|&k| k != l) {
            crate::linalg::axpy(hht.get(k, l), a.col(k), others.as_mut_slice());
        }
        let coupling = yty.matmul(&others)?;
        let mut linear = DenseMatrix::from_col_major(a.rows(), 1, full.linear.col(l).to_vec())?;
        linear.axpy(-1.0, &coupling);
        let right = DenseMatrix::filled(1, 1, hht.get(l, l));
        let column = DenseMatrix::from_col_major(a.rows(), 1, a.col(l).to_vec())?;
        let mut q = Quadratic::new(Some(yty.clone()), Some(right), linear, 0.0)?;
        q.constant = full.value(a) - q.value(&column);
        Ok(q)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `L V R`.
    pub fn apply(&self, v: &DenseMatrix) -> DenseMatrix {
        let lv = match &self.left {
            Some(l) => l.matmul(v).expect("shape checked at construction"),
            None => v.clone(),
        };
        match &self.right {
            Some(r) => lv.matmul(r).expect("shape checked at construction"),
            None => lv,
        }
    }

    fn value_with(&self, v: &DenseMatrix, lvr: &DenseMatrix) -> f64 {
        v.dot(lvr) - 2.0 * v.dot(&self.linear) + self.constant
    }

    pub fn value(&self, v: &DenseMatrix) -> f64 {
        self.value_with(v, &self.apply(v))
    }

    pub fn gradient(&self, v: &DenseMatrix) -> DenseMatrix {
        let mut g = self.apply(v);
        g.axpy(-1.0, &self.linear);
        g.scaled(2.0)
    }
}

fn check_shapes(
    x: &DenseMatrix,
    y: &DenseMatrix,
    a: Option<&DenseMatrix>,
    h: Option<&DenseMatrix>,
) -> Result<()> {
    let bad = |detail: String| Err(NcaaError::shape("subproblem", detail));
    if x.rows() != y.rows() {
        return bad(format!("X is {:?} but Y is {:?}", x.shape(), y.shape()));
    }
    if let Some(a) = a {
        if a.rows() != y.cols() {
            return bad(format!("Y is {:?} but A is {:?}", y.shape(), a.shape()));
        }
    }
    if let Some(h) = h {
        if h.cols() != x.cols() {
            return bad(format!("X is {:?} but H is {:?}", x.shape(), h.shape()));
        }
        if let Some(a) = a {
            if a.cols() != h.rows() {
                return bad(format!("A is {:?} but H is {:?}", a.shape(), h.shape()));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct FpgmOutcome {
    pub solution: DenseMatrix,
    pub objective: f64,
    pub iterations: usize,
}

/// Minimizes `q` over `constraint` starting from `warm` (projected first).
///
/// The returned point is the best accepted iterate, so its objective never
/// exceeds that of the projected warm start.
pub fn minimize(
    q: &Quadratic,
    constraint: &Constraint,
    warm: &DenseMatrix,
    cfg: &FpgmConfig,
) -> Result<FpgmOutcome> {
    cfg.validate()?;
    if warm.shape() != q.linear.shape() {
        return Err(NcaaError::shape(
            "fpgm",
            format!("warm start {:?} vs problem {:?}", warm.shape(), q.linear.shape()),
        ));
    }
    let non_finite = |iteration: usize| NcaaError::NumericFailure {
        iteration,
        detail: "objective is not finite".into(),
    };

    let mut x = warm.clone();
    constraint.project(&mut x)?;
    let mut fx = q.value(&x);
    if !fx.is_finite() {
        return Err(non_finite(0));
    }
    let mut best = x.clone();
    let mut fbest = fx;
    if q.lipschitz <= 0.0 {
        return Ok(FpgmOutcome {
            solution: best,
            objective: fbest,
            iterations: 0,
        });
    }

    let mut y = x.clone();
    let mut y_is_x = true;
    let mut t = 1.0_f64;
    let mut step = 1.0 / q.lipschitz;
    let mut first_move: Option<f64> = None;
    let mut iterations = 0;

    for it in 1..=cfg.max_iterations {
        iterations = it;
        let ly = q.apply(&y);
        let fy = q.value_with(&y, &ly);
        if !fy.is_finite() {
            return Err(non_finite(it));
        }
        let mut grad = ly;
        grad.axpy(-1.0, &q.linear);
        let grad = grad.scaled(2.0);

        let mut candidate;
        let mut fc;
        let mut backtracks = 0;
        loop {
            candidate = y.clone();
            candidate.axpy(-step, &grad);
            constraint.project(&mut candidate)?;
            fc = q.value(&candidate);
            if !fc.is_finite() {
                return Err(non_finite(it));
            }
            let diff = candidate.sub(&y)?;
            let model = fy + grad.dot(&diff) + diff.fro_norm_sq() / (2.0 * step);
            // rounding slack proportional to the magnitudes involved
            let slack = 1e-13 * (fy.abs() + q.constant.abs());
            if fc <= model + slack || backtracks >= 60 {
                break;
            }
            step *= cfg.backtrack_shrink;
            backtracks += 1;
        }

        if cfg.restart_on_increase && fc > fx {
            if y_is_x {
                // a plain projected step failed to decrease: nothing left to gain
                break;
            }
            t = 1.0;
            y = x.clone();
            y_is_x = true;
            continue;
        }

        let moved = candidate.sub(&x)?.fro_norm();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let mut y_next = candidate.clone();
        if beta != 0.0 {
            let delta = candidate.sub(&x)?;
            y_next.axpy(beta, &delta);
        }
        y_is_x = beta == 0.0;
        y = y_next;
        x = candidate;
        fx = fc;
        t = t_next;
        if fx < fbest {
            best.clone_from(&x);
            fbest = fx;
        }
        step *= cfg.backtrack_grow;

        match first_move {
            None => first_move = Some(moved),
            Some(first) if moved <= cfg.tolerance * first => break,
            _ => {}
        }
        if moved == 0.0 {
            break;
        }
    }

    Ok(FpgmOutcome {
        solution: best,
        objective: fbest,
        iterations,
    })
}

/// `‖X − YAH‖²_F`, computed from the explicit residual.
pub fn objective(x: &DenseMatrix, y: &DenseMatrix, a: &DenseMatrix, h: &DenseMatrix) -> Result<f64> {
    check_shapes(x, y, Some(a), Some(h))?;
    let w = y.matmul(a)?;
    residual_sq(x, &w, h)
}

/// `‖X − WH‖²_F` without materializing `WH` as a separate allocation per column.
pub fn residual_sq(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Result<f64> {
    if w.rows() != x.rows() || w.cols() != h.rows() || h.cols() != x.cols() {
        return Err(NcaaError::shape("residual_sq", "X, W, H are not conformable"));
    }
    let mut total = 0.0;
    let mut col = vec![0.0; x.rows()];
    for j in 0..x.cols() {
        col.copy_from_slice(x.col(j));
        for (k, &s) in h.col(j).iter().enumerate() {
            if s != 0.0 {
                crate::linalg::axpy(-s, w.col(k), &mut col);
            }
        }
        total += col.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(total)
}

/// `∇_A ‖X − YAH‖²_F = 2 Yᵀ(YAH − X)Hᵀ`.
pub fn grad_a(x: &DenseMatrix, y: &DenseMatrix, a: &DenseMatrix, h: &DenseMatrix) -> Result<DenseMatrix> {
    check_shapes(x, y, Some(a), Some(h))?;
    let residual = y.matmul(a)?.matmul(h)?.sub(x)?;
    Ok(y.t_matmul(&residual)?.matmul_t(h)?.scaled(2.0))
}

/// `∇_H ‖X − YAH‖²_F = 2 (YA)ᵀ(YAH − X)`.
pub fn grad_h(x: &DenseMatrix, y: &DenseMatrix, a: &DenseMatrix, h: &DenseMatrix) -> Result<DenseMatrix> {
    check_shapes(x, y, Some(a), Some(h))?;
    let w = y.matmul(a)?;
    let residual = w.matmul(h)?.sub(x)?;
    Ok(w.t_matmul(&residual)?.scaled(2.0))
}

/// Solves one block subproblem of `min ‖X − YAH‖²_F`.
///
/// `fixed` is `H` for the `A` updates and `A` for the `H` update. For
/// [`SubproblemKind::UpdateAColumn`] the warm start is the full `A`, and the
/// full `A` (with only that column changed) is returned. The constraint spec
/// applies to the columns being updated.
pub fn fpgm_solve(
    kind: SubproblemKind,
    x: &DenseMatrix,
    y: &DenseMatrix,
    fixed: &DenseMatrix,
    warm: &DenseMatrix,
    constraint: &EpsSimplexSpec,
    cfg: &FpgmConfig,
) -> Result<(DenseMatrix, f64)> {
    let yty = y.gram();
    fpgm_solve_with_gram(kind, x, y, &yty, fixed, warm, constraint, cfg)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn fpgm_solve_with_gram(
    kind: SubproblemKind,
    x: &DenseMatrix,
    y: &DenseMatrix,
    yty: &DenseMatrix,
    fixed: &DenseMatrix,
    warm: &DenseMatrix,
    constraint: &EpsSimplexSpec,
    cfg: &FpgmConfig,
) -> Result<(DenseMatrix, f64)> {
    let feasible = Constraint::Columns(*constraint);
    match kind {
        SubproblemKind::UpdateA => {
            check_shapes(x, y, Some(warm), Some(fixed))?;
            let q = Quadratic::for_a(x, y, yty, fixed)?;
            let out = minimize(&q, &feasible, warm, cfg)?;
            Ok((out.solution, out.objective))
        }
        SubproblemKind::UpdateH => {
            check_shapes(x, y, Some(fixed), Some(warm))?;
            let w = y.matmul(fixed)?;
            let q = Quadratic::for_h(x, &w)?;
            let out = minimize(&q, &feasible, warm, cfg)?;
            Ok((out.solution, out.objective))
        }
        SubproblemKind::UpdateAColumn(l) => {
            let q = Quadratic::for_a_column(x, y, yty, warm, fixed, l)?;
            let column = DenseMatrix::from_col_major(warm.rows(), 1, warm.col(l).to_vec())?;
            let out = minimize(&q, &feasible, &column, cfg)?;
            let mut a = warm.clone();
            a.col_mut(l).copy_from_slice(out.solution.col(0));
            Ok((a, out.objective))
        }
    }
}
