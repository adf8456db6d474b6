//! Mean-removed spectral angle, optimal assignment and evaluation reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{NcaaError, Result};
use crate::linalg::DenseMatrix;

/// `(100/π) · arccos` of the cosine between the mean-removed vectors.
/// Lies in `[0, 100]`; 0 means equal up to shift and positive scale.
pub fn mrsa(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(NcaaError::shape(
            "mrsa",
            format!("lengths {} and {}", x.len(), y.len()),
        ));
    }
    if x.is_empty() {
        return Err(NcaaError::UndefinedMetric("empty vectors".into()));
    }
    let len = x.len() as f64;
    let mx = x.iter().sum::<f64>() / len;
    let my = y.iter().sum::<f64>() / len;
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (a, b) = (a - mx, b - my);
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    if !(xx > 0.0) || !(yy > 0.0) {
        return Err(NcaaError::UndefinedMetric(
            "constant vector has no mean-removed direction".into(),
        ));
    }
    let cos = (xy / (xx * yy).sqrt()).clamp(-1.0, 1.0);
    Ok(100.0 / std::f64::consts::PI * cos.acos())
}

/// Minimum-cost assignment: `result[i]` is the column assigned to row `i`.
/// Shortest augmenting paths with potentials, `O(n³)`.
pub fn hungarian(cost: &DenseMatrix) -> Result<Vec<usize>> {
    let n = cost.rows();
    if cost.cols() != n {
        return Err(NcaaError::shape("hungarian", "cost matrix must be square"));
    }
    if !cost.is_finite() {
        return Err(NcaaError::Config("hungarian needs finite costs".into()));
    }
    // 1-based rows/cols with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// Sum of `cost[i, perm[i]]`.
pub fn assignment_cost(cost: &DenseMatrix, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `assignment[k]` is the estimated column matched to true column `k`.
    pub assignment: Vec<usize>,
    pub mrsa_per_pair: Vec<f64>,
    pub mrsa_average: f64,
    /// `‖X − X̂‖_F / ‖X‖_F`.
    pub rel_error: f64,
    pub method_tag: String,
    /// Seconds.
    pub wall_time: f64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "method,mrsa_average,rel_error,wall_time,assignment,mrsa_per_pair";

    pub fn with_tag(mut self, tag: impl Into<String>, wall_time: f64) -> Self {
        self.method_tag = tag.into();
        self.wall_time = wall_time;
        self
    }

    /// One CSV line matching [`EvalReport::CSV_HEADER`]; list fields are
    /// `;`-separated.
    pub fn csv_row(&self) -> String {
        let join = |items: Vec<String>| items.join(";");
        let mut row = String::new();
        write!(
            row,
            "{},{},{},{},{},{}",
            self.method_tag,
            self.mrsa_average,
            self.rel_error,
            self.wall_time,
            join(self.assignment.iter().map(|a| a.to_string()).collect()),
            join(self.mrsa_per_pair.iter().map(|a| a.to_string()).collect()),
        )
        .expect("writing to a String");
        row
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `r × r` matrix of `mrsa(W_true(:,k), W_est(:,l))`.
pub fn mrsa_cost(w_est: &DenseMatrix, w_true: &DenseMatrix) -> Result<DenseMatrix> {
    if w_est.shape() != w_true.shape() {
        return Err(NcaaError::shape(
            "evaluate",
            format!("estimate {:?} vs truth {:?}", w_est.shape(), w_true.shape()),
        ));
    }
    let r = w_true.cols();
    let mut cost = DenseMatrix::zeros(r, r);
    for k in 0..r {
        for l in 0..r {
            cost.set(k, l, mrsa(w_true.col(k), w_est.col(l))?);
        }
    }
    Ok(cost)
}

/// Matches estimated to true columns by minimum total MRSA and reports the
/// matched angles plus the relative reconstruction error of `x_hat`. The
/// method tag and wall time are left empty.
pub fn evaluate(
    w_est: &DenseMatrix,
    w_true: &DenseMatrix,
    x: &DenseMatrix,
    x_hat: &DenseMatrix,
) -> Result<EvalReport> {
    let cost = mrsa_cost(w_est, w_true)?;
    let assignment = hungarian(&cost)?;
    let mrsa_per_pair: Vec<f64> = assignment
        .iter()
        .enumerate()
        .map(|(k, &l)| cost.get(k, l))
        .collect();
    let mrsa_average = mrsa_per_pair.iter().sum::<f64>() / mrsa_per_pair.len().max(1) as f64;
    let norm = x.fro_norm();
    let rel_error = if norm > 0.0 {
        x.sub(x_hat)?.fro_norm() / norm
    } else {
        x_hat.fro_norm()
    };
    Ok(EvalReport {
        assignment,
        mrsa_per_pair,
        mrsa_average,
        rel_error,
        method_tag: String::new(),
        wall_time: 0.0,
    })
}
