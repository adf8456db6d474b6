//! Synthetic benchmark instances: `X = max(0, WH + υ‖WH‖ N/‖N‖)` with
//! uniform column-normalized `W` and sparse Dirichlet abundances `H` whose
//! entries are capped by a purity level.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{NcaaError, Result};
use crate::linalg::{DenseMatrix, RngStream};

/// Draw limit per column when rejecting Dirichlet samples above the purity.
pub const MAX_DRAWS_PER_COLUMN: usize = 1_000_000;

/// `(purity, rank, noise)` cells of the standard benchmark: a purity sweep, a
/// rank sweep and a noise sweep around `(0.8, 7, 0)`.
pub const BENCHMARK_GRID: [(f64, usize, f64); 11] = [
    (0.7, 7, 0.0),
    (0.8, 7, 0.0),
    (0.9, 7, 0.0),
    (1.0, 7, 0.0),
    (0.8, 3, 0.0),
    (0.8, 12, 0.0),
    (0.8, 20, 0.0),
    (0.8, 7, 0.01),
    (0.8, 7, 0.05),
    (0.8, 7, 0.1),
    (0.8, 7, 0.2),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub purity: f64,
    pub noise: f64,
    pub dirichlet_alpha: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            m: 10,
            n: 1000,
            r: 7,
            purity: 0.8,
            noise: 0.0,
            dirichlet_alpha: 0.05,
            trials: 25,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.r == 0 {
            return Err(NcaaError::Config("m, n and r must be positive".into()));
        }
        if !(self.purity > 0.0 && self.purity <= 1.0) {
            return Err(NcaaError::Config(format!("purity {} outside (0, 1]", self.purity)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(NcaaError::Config(format!("noise {} must be >= 0", self.noise)));
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return Err(NcaaError::Config("dirichlet_alpha must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticInstance {
    pub x: DenseMatrix,
    pub w_true: DenseMatrix,
    pub h_true: DenseMatrix,
    /// Largest entry of `H`.
    pub realized_purity: f64,
}

/// What gets written next to an exported instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSidecar {
    pub spec: SyntheticSpec,
    pub trial: usize,
    pub realized_purity: f64,
}

/// `log Γ(shape, 1)` sample. Shapes below one use `G(a) = G(a+1) U^{1/a}`,
/// kept in log space because `U^{1/a}` underflows for small `a`.
fn log_gamma_sample(shape: f64, rng: &mut impl Rng) -> f64 {
    if shape < 1.0 {
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        return log_gamma_sample(shape + 1.0, rng) + u.ln() / shape;
    }
    // Marsaglia and Tsang
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * z;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = 1.0 - rng.random::<f64>();
        if u.ln() < 0.5 * z * z + d - d * v + d * v.ln() {
            return d.ln() + v.ln();
        }
    }
}

/// Symmetric Dirichlet sample: normalized `Γ(alpha)` draws.
pub fn dirichlet_column(alpha: f64, r: usize, rng: &mut impl Rng) -> Vec<f64> {
    assert!(alpha > 0.0, "dirichlet alpha must be positive");
    let logs: Vec<f64> = (0..r).map(|_| log_gamma_sample(alpha, rng)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// Instance `trial` of `spec`, drawn from stream `(spec.seed, trial)`.
pub fn generate(spec: &SyntheticSpec, trial: usize) -> Result<SyntheticInstance> {
    spec.validate()?;
    let mut rng = RngStream::new(spec.seed, trial as u64);
    let (m, n, r) = (spec.m, spec.n, spec.r);

    let mut w = DenseMatrix::from_fn(m, r, |_, _| rng.random::<f64>());
    for k in 0..r {
        let s: f64 = w.col(k).iter().sum();
        w.col_mut(k).iter_mut().for_each(|v| *v /= s);
    }

    let mut h = DenseMatrix::zeros(r, n);
    for j in 0..n {
        let mut draws = 0;
        let column = loop {
            if draws == MAX_DRAWS_PER_COLUMN {
                return Err(NcaaError::Generation { column: j, draws });
            }
            draws += 1;
            let c = dirichlet_column(spec.dirichlet_alpha, r, &mut rng);
            if spec.purity >= 1.0 || c.iter().all(|&v| v <= spec.purity) {
                break c;
            }
        };
        h.col_mut(j).copy_from_slice(&column);
    }

    let clean = w.matmul(&h)?;
    let x = if spec.noise > 0.0 {
        let noise = DenseMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal));
        let scale = spec.noise * clean.fro_norm() / noise.fro_norm();
        let mut x = clean;
        x.axpy(scale, &noise);
        x.map(|v| v.max(0.0))
    } else {
        clean
    };

    Ok(SyntheticInstance {
        x,
        realized_purity: h.max_value(),
        w_true: w,
        h_true: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(purity: f64, noise: f64) -> SyntheticSpec {
        SyntheticSpec {
            n: 200,
            purity,
            noise,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn dirichlet_sums_to_one() {
        let mut rng = RngStream::new(1, 0);
        for alpha in [0.01, 0.05, 1.0, 3.5, 100.0] {
            for _ in 0..200 {
                let c = dirichlet_column(alpha, 7, &mut rng);
                assert!(c.iter().all(|&v| v >= 0.0 && v.is_finite()));
                assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_alpha_is_sparse() {
        let mut rng = RngStream::new(2, 0);
        let draws = 10_000;
        let mean_max: f64 = (0..draws)
            .map(|_| dirichlet_column(0.05, 7, &mut rng).into_iter().fold(0.0, f64::max))
            .sum::<f64>()
            / draws as f64;
        // about 0.84 on this stream
        assert!(mean_max > 0.8, "mean max entry {mean_max}");
    }

    #[test]
    fn large_alpha_concentrates() {
        let mut rng = RngStream::new(3, 0);
        let r = 7;
        let below = (0..10_000)
            .filter(|_| {
                dirichlet_column(100.0, r, &mut rng)
                    .into_iter()
                    .fold(0.0, f64::max)
                    < 2.0 / r as f64
            })
            .count();
        assert!(below >= 9_900, "{below}");
    }

    #[test]
    fn gamma_mean_matches_shape() {
        let mut rng = RngStream::new(4, 0);
        for shape in [0.3, 2.5] {
            let k = 40_000;
            let mean = (0..k).map(|_| log_gamma_sample(shape, &mut rng).exp()).sum::<f64>() / k as f64;
            assert!((mean - shape).abs() < 0.03 * shape.max(1.0), "shape {shape}: {mean}");
        }
    }

    #[test]
    fn noiseless_instance_is_exact() {
        let inst = generate(&spec(0.8, 0.0), 0).unwrap();
        let wh = inst.w_true.matmul(&inst.h_true).unwrap();
        assert_eq!(inst.x, wh);
        assert!(inst.x.min_value() >= 0.0);
        for s in inst.w_true.column_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(inst.w_true.min_value() >= 0.0);
        assert!(inst.h_true.max_value() <= 0.8);
        assert!(inst.realized_purity <= 0.8);
        for s in inst.h_true.column_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_is_calibrated_before_clipping() {
        // regenerate the noise draw on the same stream to see X̃ + noise before the clip
        let s = spec(0.9, 0.2);
        let inst = generate(&s, 3).unwrap();
        let clean = inst.w_true.matmul(&inst.h_true).unwrap();
        let realized = inst.x.sub(&clean).unwrap().fro_norm() / clean.fro_norm();
        assert!(realized <= 0.2 + 1e-12);
        assert!(realized > 0.1);
        assert!(inst.x.min_value() >= 0.0);

        let mut rng = RngStream::new(s.seed, 3);
        let _ = DenseMatrix::from_fn(s.m, s.r, |_, _| rng.random::<f64>());
        for _ in 0..s.n {
            loop {
                let c = dirichlet_column(s.dirichlet_alpha, s.r, &mut rng);
                if c.iter().all(|&v| v <= s.purity) {
                    break;
                }
            }
        }
        let noise = DenseMatrix::from_fn(s.m, s.n, |_, _| rng.sample(StandardNormal));
        let unclipped = clean.add(&noise.scaled(0.2 * clean.fro_norm() / noise.fro_norm())).unwrap();
        let ratio = unclipped.sub(&clean).unwrap().fro_norm() / clean.fro_norm();
        assert!((ratio - 0.2).abs() < 1e-12);
        assert_eq!(unclipped.map(|v| v.max(0.0)), inst.x);
    }

    #[test]
    fn deterministic_per_trial() {
        let s = spec(0.8, 0.1);
        let a = generate(&s, 2).unwrap();
        let b = generate(&s, 2).unwrap();
        let c = generate(&s, 3).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.h_true, b.h_true);
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn pure_trials_have_high_realized_purity() {
        let s = SyntheticSpec {
            purity: 1.0,
            ..spec(1.0, 0.0)
        };
        for trial in 0..25 {
            assert!(generate(&s, trial).unwrap().realized_purity >= 0.95);
        }
    }

    #[test]
    fn unreachable_purity_fails_with_column() {
        let s = SyntheticSpec {
            r: 3,
            purity: 0.2,
            n: 2,
            ..Default::default()
        };
        match generate(&s, 0) {
            Err(NcaaError::Generation { column, draws }) => {
                assert_eq!(column, 0);
                assert_eq!(draws, MAX_DRAWS_PER_COLUMN);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        assert!(SyntheticSpec::default().validate().is_ok());
        assert!(spec(0.0, 0.0).validate().is_err());
        assert!(spec(1.1, 0.0).validate().is_err());
        assert!(spec(0.5, -0.1).validate().is_err());
    }
}
