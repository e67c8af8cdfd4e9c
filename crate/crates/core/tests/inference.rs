mod common;

use checkins::experiment::{generate, SyntheticConfig};
use checkins::inference::{fit, EMConfig};

#[test]
fn gradient_matches_central_differences() {
    common::gradient_check(100).unwrap();
}

#[test]
fn hessian_is_negative_semidefinite() {
    common::hessian_check(20).unwrap();
}

#[test]
fn objective_decomposes_over_users() {
    common::decomposition_check(10).unwrap();
}

#[test]
fn likelihood_matches_brute_force() {
    common::brute_force_check().unwrap();
}

#[test]
fn em_trace_is_monotone() {
    for seed in 1..=3u64 {
        let cfg = SyntheticConfig { power: 3, n_events: 600, seed, ..SyntheticConfig::default() };
        let inst = generate(&cfg).unwrap();
        for mask in [None, Some(&inst.graph)] {
            let r = fit(&inst.log, &inst.hyper, &EMConfig::default(), None, mask).unwrap();
            for (i, w) in r.loglik_trace.windows(2).enumerate() {
                assert!(w[1] >= w[0] - 1e-8, "seed {seed} iteration {i}: {} -> {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn fit_from_truth_barely_moves() {
    let inst = generate(&SyntheticConfig { power: 3, n_events: 800, seed: 4, ..SyntheticConfig::default() }).unwrap();
    let cfg = EMConfig { max_em_iters: 1, ..EMConfig::default() };
    let r = fit(&inst.log, &inst.hyper, &cfg, Some(&inst.truth), Some(&inst.graph)).unwrap();
    let gain = r.loglik_trace[1] - r.loglik_trace[0];
    assert!(gain >= -1e-8);
    assert!(gain < 0.05 * inst.log.len() as f64, "gain {gain}");
}

#[test]
fn masked_fit_keeps_alpha_off_the_graph_at_zero() {
    let inst = generate(&SyntheticConfig { power: 3, n_events: 400, seed: 9, ..SyntheticConfig::default() }).unwrap();
    let r = fit(&inst.log, &inst.hyper, &EMConfig::default(), None, Some(&inst.graph)).unwrap();
    let g = &inst.graph;
    for v in 0..g.n() {
        for u in 0..g.n() {
            if !g.has_edge(v, u) {
                assert_eq!(r.params.alpha(v, u), 0.0);
            }
        }
    }
}

#[test]
fn same_init_seed_same_fit() {
    let inst = generate(&SyntheticConfig { power: 2, n_events: 200, seed: 2, ..SyntheticConfig::default() }).unwrap();
    let a = fit(&inst.log, &inst.hyper, &EMConfig::default(), None, None).unwrap();
    let b = fit(&inst.log, &inst.hyper, &EMConfig::default(), None, None).unwrap();
    assert_eq!(a, b);
}
