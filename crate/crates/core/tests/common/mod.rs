//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use ncaa_core::fpgm::{Constraint, Quadratic};
use ncaa_core::projections::SumMode;
use ncaa_core::{DenseMatrix, RngStream};
use rand::Rng;

/// Projection onto `{y ≥ -ε, Σy = 1}` (or `Σy ≤ 1`) by gradient ascent on the
/// scalar dual variable of the sum constraint; `y(θ) = max(x - θ, -ε)`.
pub fn projection_oracle(x: &[f64], eps: f64, mode: SumMode, steps: usize) -> Vec<f64> {
    let d = x.len() as f64;
    let primal = |theta: f64| -> Vec<f64> { x.iter().map(|v| (v - theta).max(-eps)).collect() };
    let mut theta = 0.0;
    for _ in 0..steps {
        let slack: f64 = primal(theta).iter().sum::<f64>() - 1.0;
        theta += slack / d;
        if mode == SumMode::AtMostOne {
            theta = theta.max(0.0);
        }
    }
    primal(theta)
}

/// Central differences of `f` at every entry of `m`.
pub fn finite_difference(m: &DenseMatrix, step: f64, f: impl Fn(&DenseMatrix) -> f64) -> DenseMatrix {
    let mut g = DenseMatrix::zeros(m.rows(), m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            let mut up = m.clone();
            up.set(i, j, m.get(i, j) + step);
            let mut down = m.clone();
            down.set(i, j, m.get(i, j) - step);
            g.set(i, j, (f(&up) - f(&down)) / (2.0 * step));
        }
    }
    g
}

/// Plain projected gradient with step `1/L`.
pub fn projected_gradient(q: &Quadratic, constraint: &Constraint, start: &DenseMatrix, steps: usize) -> (DenseMatrix, f64) {
    let mut v = start.clone();
    constraint.project(&mut v).unwrap();
    let step = 1.0 / q.lipschitz();
    for _ in 0..steps {
        let g = q.gradient(&v);
        v.axpy(-step, &g);
        constraint.project(&mut v).unwrap();
    }
    let f = q.value(&v);
    (v, f)
}

/// Minimum total cost over all permutations (Heap's algorithm).
pub fn brute_force_assignment(cost: &DenseMatrix) -> f64 {
    let n = cost.rows();
    let mut perm: Vec<usize> = (0..n).collect();
    let total = |p: &[usize]| -> f64 { p.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum() };
    let mut best = total(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(total(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

pub fn uniform(rows: usize, cols: usize, rng: &mut RngStream) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

/// Columns on the unit simplex (sum exactly normalized).
pub fn simplex_columns(rows: usize, cols: usize, rng: &mut RngStream) -> DenseMatrix {
    let mut m = uniform(rows, cols, rng);
    for j in 0..cols {
        let s: f64 = m.col(j).iter().sum();
        m.col_mut(j).iter_mut().for_each(|v| *v /= s);
    }
    m
}
