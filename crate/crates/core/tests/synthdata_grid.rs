use ncaa_core::baselines::snpa_unmix;
use ncaa_core::evaluation::evaluate;
use ncaa_core::synthdata::{generate, SyntheticSpec, BENCHMARK_GRID};

#[test]
fn every_grid_cell_satisfies_the_instance_invariants() {
    for &(purity, r, noise) in &BENCHMARK_GRID {
        let spec = SyntheticSpec { n: 300, r, purity, noise, seed: 5, ..Default::default() };
        for trial in 0..2 {
            let inst = generate(&spec, trial).unwrap();
            assert_eq!(inst.x.shape(), (10, 300));
            assert!(inst.x.min_value() >= 0.0);
            assert!(inst.w_true.min_value() >= 0.0);
            for s in inst.w_true.column_sums() {
                assert!((s - 1.0).abs() < 1e-12);
            }
            assert!(inst.h_true.min_value() >= 0.0);
            assert!(inst.h_true.max_value() <= purity);
            for s in inst.h_true.column_sums() {
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn instances_are_bitwise_reproducible() {
    let spec = SyntheticSpec { n: 100, noise: 0.05, seed: 77, ..Default::default() };
    let a = generate(&spec, 4).unwrap();
    let b = generate(&spec, 4).unwrap();
    assert!(a.x.as_slice().iter().zip(b.x.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn snpa_recovers_separable_noiseless_archetypes() {
    let spec = SyntheticSpec { n: 500, r: 7, purity: 1.0, seed: 12, ..Default::default() };
    for trial in 0..3 {
        let inst = generate(&spec, trial).unwrap();
        let (w, h) = snpa_unmix(&inst.x, 7).unwrap();
        let report = evaluate(&w, &inst.w_true, &inst.x, &w.matmul(&h).unwrap()).unwrap();
        assert!(report.mrsa_average < 0.01, "trial {trial}: {}", report.mrsa_average);
    }
}
