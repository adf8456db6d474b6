//! Euclidean projections onto the simplex-type sets used by the factor updates.
//!
//! Every projection here reduces to the probability-simplex projection of a
//! shifted vector: `{y ≥ -ε, Σy = 1}` becomes `{y' ≥ 0, Σy' = 1 + dε}` under
//! `y' = y + ε`, which the sort-based routine handles exactly.

use serde::{Deserialize, Serialize};

use crate::error::{NcaaError, Result};
use crate::linalg::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumMode {
    /// `Σ y = 1`, used for the columns of the anchor-coefficient matrix.
    EqualOne,
    /// `Σ y ≤ 1`, used for the abundance columns.
    AtMostOne,
}

/// The set `{y ∈ R^dimension : y ≥ -epsilon, Σy (= or ≤) 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsSimplexSpec {
    pub dimension: usize,
    pub epsilon: f64,
    pub sum_mode: SumMode,
}

impl EpsSimplexSpec {
    pub fn new(dimension: usize, epsilon: f64, sum_mode: SumMode) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(NcaaError::Config(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )));
        }
        Ok(EpsSimplexSpec {
            dimension,
            epsilon,
            sum_mode,
        })
    }

    /// `Δ^r`: nonnegative with sum at most one.
    pub fn subsimplex(dimension: usize) -> Self {
        EpsSimplexSpec {
            dimension,
            epsilon: 0.0,
            sum_mode: SumMode::AtMostOne,
        }
    }

    /// Entries `≥ -epsilon`, summing to exactly one.
    pub fn near_convex(dimension: usize, epsilon: f64) -> Result<Self> {
        Self::new(dimension, epsilon, SumMode::EqualOne)
    }

    /// Largest constraint violation of `x` (0 when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lower = x
            .iter()
            .map(|&v| (-self.epsilon - v).max(0.0))
            .fold(0.0, f64::max);
        let s: f64 = x.iter().sum();
        let sum = match self.sum_mode {
            SumMode::EqualOne => (s - 1.0).abs(),
            SumMode::AtMostOne => (s - 1.0).max(0.0),
        };
        lower.max(sum)
    }
}

/// Threshold `θ` such that `max(x - θ, 0)` is the projection of `x` onto
/// `{y ≥ 0, Σy = mass}` (mass > 0). `scratch` avoids allocation in hot loops.
fn simplex_threshold(x: &[f64], mass: f64, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(x);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in scratch.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - mass) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    theta
}

fn project_onto_mass(x: &mut [f64], mass: f64, scratch: &mut Vec<f64>) {
    let theta = simplex_threshold(x, mass, scratch);
    x.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

/// In-place projection of one column onto `{y ≥ -eps, Σy (= or ≤) 1}`.
pub fn project_in_place(x: &mut [f64], epsilon: f64, mode: SumMode, scratch: &mut Vec<f64>) {
    let d = x.len();
    if d == 0 {
        return;
    }
    let mass = 1.0 + d as f64 * epsilon;
    x.iter_mut().for_each(|v| *v += epsilon);
    match mode {
        SumMode::EqualOne => project_onto_mass(x, mass, scratch),
        SumMode::AtMostOne => {
            let mut s = 0.0;
            for v in x.iter_mut() {
                *v = v.max(0.0);
                s += *v;
            }
            if s > mass {
                project_onto_mass(x, mass, scratch);
            }
        }
    }
    x.iter_mut().for_each(|v| *v -= epsilon);
}

/// Projection onto `Δ^r = {y ≥ 0, Σy ≤ 1}`.
pub fn project_subsimplex(x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    project_in_place(&mut y, 0.0, SumMode::AtMostOne, &mut Vec::new());
    y
}

/// Projection onto the set described by `spec`.
///
/// Panics if `x.len() != spec.dimension`.
pub fn project_eps_simplex(x: &[f64], spec: &EpsSimplexSpec) -> Vec<f64> {
    assert_eq!(x.len(), spec.dimension, "vector length must match spec dimension");
    let mut y = x.to_vec();
    project_in_place(&mut y, spec.epsilon, spec.sum_mode, &mut Vec::new());
    y
}

pub fn project_columns(m: &DenseMatrix, spec: &EpsSimplexSpec) -> Result<DenseMatrix> {
    let mut out = m.clone();
    project_columns_in_place(&mut out, spec)?;
    Ok(out)
}

pub fn project_columns_in_place(m: &mut DenseMatrix, spec: &EpsSimplexSpec) -> Result<()> {
    if m.rows() != spec.dimension {
        return Err(NcaaError::shape(
            "project_columns",
            format!("matrix has {} rows, spec dimension {}", m.rows(), spec.dimension),
        ));
    }
    let mut scratch = Vec::with_capacity(m.rows());
    for j in 0..m.cols() {
        project_in_place(m.col_mut(j), spec.epsilon, spec.sum_mode, &mut scratch);
    }
    Ok(())
}

/// Largest violation over all columns.
pub fn max_column_violation(m: &DenseMatrix, spec: &EpsSimplexSpec) -> f64 {
    m.columns().map(|c| spec.violation(c)).fold(0.0, f64::max)
}
