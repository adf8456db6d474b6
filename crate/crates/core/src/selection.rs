//! Anchor selection: which data columns form `Y`.
//!
//! [`snpa_select`] greedily extracts extreme columns (successive nonnegative
//! projection). [`hc_select`] builds a divisive hierarchy with rank-two
//! nonnegative splits and keeps, for each leaf cluster, the data column
//! closest to the cluster centroid; it is far less sensitive to outliers.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{NcaaError, Result};
use crate::fpgm::{minimize, Constraint, FpgmConfig, Quadratic};
use crate::linalg::DenseMatrix;
use crate::projections::EpsSimplexSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Snpa,
    Hc,
}

impl std::str::FromStr for SelectionMethod {
    type Err = NcaaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "snpa" => Ok(SelectionMethod::Snpa),
            "hc" => Ok(SelectionMethod::Hc),
            other => Err(NcaaError::Config(format!("unknown selector {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Column indices into `X`; `Y(:, j) = X(:, indices[j])`.
    pub indices: Vec<usize>,
    pub y: DenseMatrix,
    pub method: SelectionMethod,
    /// Set when fewer than the requested number of columns could be selected.
    pub truncated: bool,
}

/// Full SNPA output, including the simplex-constrained coefficients of the
/// last projection step.
#[derive(Clone, Debug)]
pub struct SnpaOutcome {
    pub indices: Vec<usize>,
    /// `|indices| × n`, columns in `Δ^{|indices|}`.
    pub h: DenseMatrix,
    /// Residual squared norms observed at each pick, in pick order.
    pub picked_residuals: Vec<f64>,
    pub truncated: bool,
}

/// Number of FPGM iterations for each SNPA projection step.
pub const SNPA_INNER_ITERATIONS: usize = 100;

fn residual_norms(x: &DenseMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Vec<f64> {
    let mut col = vec![0.0; x.rows()];
    (0..x.cols())
        .map(|j| {
            col.copy_from_slice(x.col(j));
            for (k, &s) in h.col(j).iter().enumerate() {
                if s != 0.0 {
                    crate::linalg::axpy(-s, w.col(k), &mut col);
                }
            }
            col.iter().map(|v| v * v).sum()
        })
        .collect()
}

/// Successive nonnegative projection algorithm.
pub fn snpa(x: &DenseMatrix, count: usize) -> Result<SnpaOutcome> {
    let n = x.cols();
    if count == 0 || count > n {
        return Err(NcaaError::Config(format!(
            "cannot select {count} columns from a matrix with {n} columns"
        )));
    }
    let mut residual: Vec<f64> = x.columns().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let scale = residual.iter().copied().fold(0.0, f64::max);
    let cfg = FpgmConfig::with_iterations(SNPA_INNER_ITERATIONS);
    let mut indices = Vec::with_capacity(count);
    let mut picked = vec![false; n];
    let mut picked_residuals = Vec::with_capacity(count);
    let mut h = DenseMatrix::zeros(0, n);
    let mut truncated = false;

    while indices.len() < count {
        let mut best: Option<(usize, f64)> = None;
        for (j, &r) in residual.iter().enumerate() {
            if !picked[j] && best.is_none_or(|(_, b)| r > b) {
                best = Some((j, r));
            }
        }
        let (j, r) = best.expect("count <= n leaves an unpicked column");
        if r <= 1e-12 * scale || scale == 0.0 {
            truncated = true;
            warn!(
                "SNPA residual vanished after {} of {count} picks",
                indices.len()
            );
            break;
        }
        debug_assert!(residual
            .iter()
            .enumerate()
            .all(|(k, &rk)| picked[k] || rk <= r));
        picked[j] = true;
        indices.push(j);
        picked_residuals.push(r);

        let k = indices.len();
        let w = x.select_columns(&indices);
        let mut warm = DenseMatrix::zeros(k, n);
        for c in 0..n {
            warm.col_mut(c)[..k - 1].copy_from_slice(h.col(c));
        }
        let q = Quadratic::for_h(x, &w)?;
        let out = minimize(
            &q,
            &Constraint::Columns(EpsSimplexSpec::subsimplex(k)),
            &warm,
            &cfg,
        )?;
        h = out.solution;
        residual = residual_norms(x, &w, &h);
    }

    Ok(SnpaOutcome {
        indices,
        h,
        picked_residuals,
        truncated,
    })
}

pub fn snpa_select(x: &DenseMatrix, d: usize) -> Result<SelectionResult> {
    let out = snpa(x, d)?;
    Ok(SelectionResult {
        y: x.select_columns(&out.indices),
        indices: out.indices,
        method: SelectionMethod::Snpa,
        truncated: out.truncated,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn centroid(x: &DenseMatrix, members: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; x.rows()];
    for &j in members {
        crate::linalg::axpy(1.0, x.col(j), &mut c);
    }
    let inv = 1.0 / members.len() as f64;
    c.iter_mut().for_each(|v| *v *= inv);
    c
}

/// Member closest to the centroid (lowest index on ties).
fn representative(x: &DenseMatrix, members: &[usize]) -> usize {
    let c = centroid(x, members);
    let mut best = (members[0], f64::INFINITY);
    for &j in members {
        let dist = sq_dist(x.col(j), &c);
        if dist < best.1 {
            best = (j, dist);
        }
    }
    best.0
}

/// `argmin_{z ≥ 0} zᵀGz − 2cᵀz` for a 2×2 PSD `G`.
fn nnls2(g: [[f64; 2]; 2], c: [f64; 2]) -> [f64; 2] {
    let value = |z: [f64; 2]| {
        z[0] * (g[0][0] * z[0] + g[0][1] * z[1]) + z[1] * (g[1][0] * z[0] + g[1][1] * z[1])
            - 2.0 * (c[0] * z[0] + c[1] * z[1])
    };
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    if det > 1e-14 * (g[0][0] * g[1][1]).max(f64::MIN_POSITIVE) {
        let z = [
            (g[1][1] * c[0] - g[0][1] * c[1]) / det,
            (g[0][0] * c[1] - g[1][0] * c[0]) / det,
        ];
        if z[0] >= 0.0 && z[1] >= 0.0 {
            return z;
        }
    }
    let mut best = [0.0, 0.0];
    let mut fbest = 0.0;
    if g[0][0] > 0.0 && c[0] > 0.0 {
        let z = [c[0] / g[0][0], 0.0];
        if value(z) < fbest {
            fbest = value(z);
            best = z;
        }
    }
    if g[1][1] > 0.0 && c[1] > 0.0 {
        let z = [0.0, c[1] / g[1][1]];
        if value(z) < fbest {
            best = z;
        }
    }
    best
}

const RANK2_ITERATIONS: usize = 30;

/// Splits `members` in two with a rank-two NMF of their columns, assigning
/// each column to the factor that dominates its reconstruction.
fn rank2_split(x: &DenseMatrix, members: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let m = x.rows();
    let c = centroid(x, members);
    let far = |from: &[f64]| {
        let mut best = (members[0], -1.0);
        for &j in members {
            let dist = sq_dist(x.col(j), from);
            if dist > best.1 {
                best = (j, dist);
            }
        }
        best.0
    };
    let p1 = far(&c);
    let p2 = far(x.col(p1));
    let mut w = [x.col(p1).to_vec(), x.col(p2).to_vec()];
    let mut h = vec![[0.0f64; 2]; members.len()];

    for _ in 0..RANK2_ITERATIONS {
        // H step: one 2-variable NNLS per column
        let dotw = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        let g = [
            [dotw(&w[0], &w[0]), dotw(&w[0], &w[1])],
            [dotw(&w[1], &w[0]), dotw(&w[1], &w[1])],
        ];
        for (hj, &j) in h.iter_mut().zip(members) {
            let col = x.col(j);
            *hj = nnls2(g, [dotw(&w[0], col), dotw(&w[1], col)]);
        }
        // W step: one 2-variable NNLS per row
        let mut gh = [[0.0; 2]; 2];
        for hj in &h {
            for a in 0..2 {
                for b in 0..2 {
                    gh[a][b] += hj[a] * hj[b];
                }
            }
        }
        for i in 0..m {
            let mut rhs = [0.0; 2];
            for (hj, &j) in h.iter().zip(members) {
                let v = x.get(i, j);
                rhs[0] += hj[0] * v;
                rhs[1] += hj[1] * v;
            }
            let z = nnls2(gh, rhs);
            w[0][i] = z[0];
            w[1][i] = z[1];
        }
    }

    let n0 = w[0].iter().map(|v| v * v).sum::<f64>().sqrt();
    let n1 = w[1].iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (hj, &j) in h.iter().zip(members) {
        if hj[0] * n0 >= hj[1] * n1 {
            left.push(j);
        } else {
            right.push(j);
        }
    }
    (left, right)
}

fn is_degenerate(x: &DenseMatrix, members: &[usize]) -> bool {
    let c = centroid(x, members);
    let scale = c.iter().map(|v| v * v).sum::<f64>().max(1.0);
    members.iter().all(|&j| sq_dist(x.col(j), &c) <= 1e-24 * scale)
}

/// Divisive hierarchical clustering with rank-two NMF splits.
///
/// The largest splittable cluster is split until `d` clusters exist; each
/// cluster contributes the data column nearest its centroid.
pub fn hc_select(x: &DenseMatrix, d: usize) -> Result<SelectionResult> {
    let n = x.cols();
    if d == 0 || d > n {
        return Err(NcaaError::Config(format!(
            "cannot select {d} columns from a matrix with {n} columns"
        )));
    }
    let mut clusters: Vec<(Vec<usize>, bool)> = vec![((0..n).collect(), true)];
    while clusters.len() < d {
        let target = clusters
            .iter()
            .enumerate()
            .filter(|(_, (members, splittable))| *splittable && members.len() > 1)
            .max_by(|a, b| a.1 .0.len().cmp(&b.1 .0.len()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i);
        let Some(i) = target else { break };
        if is_degenerate(x, &clusters[i].0) {
            clusters[i].1 = false;
            continue;
        }
        let (left, right) = rank2_split(x, &clusters[i].0);
        if left.is_empty() || right.is_empty() {
            clusters[i].1 = false;
            continue;
        }
        clusters[i] = (left, true);
        clusters.insert(i + 1, (right, true));
    }
    let truncated = clusters.len() < d;
    if truncated {
        warn!("hierarchical clustering produced only {} of {d} clusters", clusters.len());
    }
    let indices: Vec<usize> = clusters.iter().map(|(m, _)| representative(x, m)).collect();
    Ok(SelectionResult {
        y: x.select_columns(&indices),
        indices,
        method: SelectionMethod::Hc,
        truncated,
    })
}

pub fn select(x: &DenseMatrix, d: usize, method: SelectionMethod) -> Result<SelectionResult> {
    match method {
        SelectionMethod::Snpa => snpa_select(x, d),
        SelectionMethod::Hc => hc_select(x, d),
    }
}
