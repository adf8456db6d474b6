mod common;

use common::{finite_difference, uniform};
use ncaa_core::baselines::{logdet_gradient, logdet_penalty};
use ncaa_core::fpgm::{grad_a, grad_h, objective};
use ncaa_core::{DenseMatrix, RngStream};

fn relative_gap(analytic: &DenseMatrix, numeric: &DenseMatrix) -> f64 {
    analytic.sub(numeric).unwrap().fro_norm() / analytic.fro_norm().max(1e-12)
}

#[test]
fn objective_gradients_match_central_differences() {
    for seed in 0..20 {
        let mut rng = RngStream::new(200 + seed, 0);
        let (m, n, d, r) = (4, 6, 3, 2);
        let x = uniform(m, n, &mut rng);
        let y = uniform(m, d, &mut rng);
        let a = uniform(d, r, &mut rng);
        let h = uniform(r, n, &mut rng);

        let ga = grad_a(&x, &y, &a, &h).unwrap();
        let fa = finite_difference(&a, 1e-6, |v| objective(&x, &y, v, &h).unwrap());
        assert!(relative_gap(&ga, &fa) < 1e-5, "seed {seed}: grad_A");

        let gh = grad_h(&x, &y, &a, &h).unwrap();
        let fh = finite_difference(&h, 1e-6, |v| objective(&x, &y, &a, v).unwrap());
        assert!(relative_gap(&gh, &fh) < 1e-5, "seed {seed}: grad_H");
    }
}

#[test]
fn logdet_gradient_matches_central_differences() {
    for seed in 0..20 {
        let mut rng = RngStream::new(300 + seed, 0);
        let w = uniform(5, 3, &mut rng);
        let g = logdet_gradient(&w, 0.1).unwrap();
        let f = finite_difference(&w, 1e-6, |v| logdet_penalty(v, 0.1).unwrap());
        assert!(relative_gap(&g, &f) < 1e-5, "seed {seed}");
    }
}

#[test]
fn gradients_vanish_at_zero_residual() {
    let mut rng = RngStream::new(7, 0);
    let y = uniform(4, 3, &mut rng);
    let a = uniform(3, 2, &mut rng);
    let h = uniform(2, 5, &mut rng);
    let x = y.matmul(&a).unwrap().matmul(&h).unwrap();
    assert!(grad_a(&x, &y, &a, &h).unwrap().fro_norm() < 1e-12);
    assert!(grad_h(&x, &y, &a, &h).unwrap().fro_norm() < 1e-12);
}
