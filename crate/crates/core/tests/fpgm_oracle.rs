mod common;

use common::{projected_gradient, simplex_columns, uniform};
use ncaa_core::fpgm::{fpgm_solve, minimize, Constraint, FpgmConfig, Quadratic, SubproblemKind};
use ncaa_core::projections::EpsSimplexSpec;
use ncaa_core::RngStream;
use proptest::prelude::*;

fn exact_config(iterations: usize) -> FpgmConfig {
    FpgmConfig {
        max_iterations: iterations,
        tolerance: 0.0,
        ..FpgmConfig::default()
    }
}

#[test]
fn h_update_reaches_long_run_projected_gradient() {
    for seed in 0..5 {
        let mut rng = RngStream::new(400 + seed, 0);
        let x = uniform(5, 8, &mut rng);
        let w = uniform(5, 3, &mut rng);
        let q = Quadratic::for_h(&x, &w).unwrap();
        let c = Constraint::Columns(EpsSimplexSpec::subsimplex(3));
        let start = simplex_columns(3, 8, &mut rng);
        let (_, oracle) = projected_gradient(&q, &c, &start, 100_000);
        let out = minimize(&q, &c, &start, &exact_config(2_000)).unwrap();
        assert!(out.objective <= oracle + 1e-6, "seed {seed}: {} vs {oracle}", out.objective);
        assert!((out.objective - oracle).abs() < 1e-6);
    }
}

#[test]
fn a_update_reaches_long_run_projected_gradient() {
    for seed in 0..5 {
        let mut rng = RngStream::new(500 + seed, 0);
        let x = uniform(5, 10, &mut rng);
        let y = uniform(5, 4, &mut rng);
        let h = simplex_columns(2, 10, &mut rng);
        let yty = y.gram();
        let q = Quadratic::for_a(&x, &y, &yty, &h).unwrap();
        let c = Constraint::Columns(EpsSimplexSpec::near_convex(4, 0.1).unwrap());
        let start = simplex_columns(4, 2, &mut rng);
        let (_, oracle) = projected_gradient(&q, &c, &start, 100_000);
        let out = minimize(&q, &c, &start, &exact_config(2_000)).unwrap();
        assert!((out.objective - oracle).abs() < 1e-6, "seed {seed}: {} vs {oracle}", out.objective);
    }
}

#[test]
fn acceleration_beats_plain_gradient_at_fifty_steps() {
    let mut wins = 0;
    for seed in 0..20 {
        let mut rng = RngStream::new(600 + seed, 0);
        let x = uniform(10, 40, &mut rng);
        let w = uniform(10, 6, &mut rng);
        let q = Quadratic::for_h(&x, &w).unwrap();
        let c = Constraint::Columns(EpsSimplexSpec::subsimplex(6));
        let start = simplex_columns(6, 40, &mut rng);
        let (_, plain) = projected_gradient(&q, &c, &start, 50);
        let fast = minimize(&q, &c, &start, &exact_config(50)).unwrap().objective;
        if fast <= plain {
            wins += 1;
        }
    }
    assert!(wins >= 18, "accelerated method won {wins} of 20");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn solve_is_feasible_and_not_worse_than_warm_start(seed in 0u64..10_000, eps in 0.0f64..0.3, which in 0usize..3) {
        let mut rng = RngStream::new(seed, 7);
        let x = uniform(4, 9, &mut rng);
        let y = uniform(4, 5, &mut rng);
        let a = simplex_columns(5, 3, &mut rng);
        let h = simplex_columns(3, 9, &mut rng);
        let cfg = FpgmConfig::with_iterations(30);
        let before = ncaa_core::fpgm::objective(&x, &y, &a, &h).unwrap();
        let (kind, spec, fixed, warm) = match which {
            0 => (SubproblemKind::UpdateA, EpsSimplexSpec::near_convex(5, eps).unwrap(), &h, &a),
            1 => (SubproblemKind::UpdateH, EpsSimplexSpec::subsimplex(3), &a, &h),
            _ => (SubproblemKind::UpdateAColumn(1), EpsSimplexSpec::near_convex(5, eps).unwrap(), &h, &a),
        };
        let (sol, value) = fpgm_solve(kind, &x, &y, fixed, warm, &spec, &cfg).unwrap();
        let violation = match kind {
            SubproblemKind::UpdateAColumn(l) => spec.violation(sol.col(l)),
            _ => ncaa_core::projections::max_column_violation(&sol, &spec),
        };
        prop_assert!(violation <= 1e-10);
        prop_assert!(value <= before + 1e-12 * before.max(1.0));
    }
}
