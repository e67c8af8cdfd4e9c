mod common;

use checkins::graphs::{kronecker_graph, kronecker_graph_with_loops, KroneckerSeed};
use checkins::metrics::{accuracy_at_k, edge_auc, ndcg_at_k, NdcgMode};
use checkins::spatial::compute_weights;
use checkins::{Checkin, EventLog, Filter, SocialGraph};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[test]
fn location_distribution_normalizes_and_gamma_marginalizes() {
    common::spatial_check(1000).unwrap();
}

#[test]
fn weights_decay_without_new_events() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for _ in 0..200 {
        let (log, _, hyper, t) = common::random_spatial_state(&mut rng);
        let later = t + rng.random_range(0.0..5.0);
        // no events in [t, later)
        let cut: Vec<Checkin> = log.events().iter().copied().filter(|e| e.t < t).collect();
        let early = EventLog::new(log.n_users(), log.layout().clone(), cut, log.horizon()).unwrap();
        let a = compute_weights(&early, &hyper, t).unwrap();
        let b = compute_weights(&early, &hyper, later).unwrap();
        let s = (-hyper.spatial_decay * (later - t)).exp();
        for l in 0..log.n_locations() {
            assert!((b.m(l) - s * a.m(l)).abs() <= 1e-12 * a.m(l).max(1e-300));
            for v in 0..log.n_users() {
                assert!((b.activity(v, l) - s * a.activity(v, l)).abs() <= 1e-12 * a.activity(v, l).max(1e-300));
            }
        }
    }
}

#[test]
fn kronecker_edge_count_matches_expectation() {
    let seed = KroneckerSeed::core_periphery(4);
    let n = seed.n_nodes();
    let diag: f64 = (0..n).map(|i| seed.edge_probability(i, i)).sum();
    let expected = seed.expected_edges() - diag;
    let var: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| {
            let p = seed.edge_probability(i, j);
            p * (1.0 - p)
        })
        .sum();
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let runs = 2000;
    let mean = (0..runs).map(|_| kronecker_graph(&seed, &mut rng).edge_count() as f64).sum::<f64>() / runs as f64;
    let se = (var / runs as f64).sqrt();
    assert!((mean - expected).abs() < 4.0 * se, "mean {mean}, expected {expected} ± {se}");

    let with_loops = (0..runs)
        .map(|_| kronecker_graph_with_loops(&seed, true, &mut rng).edge_count() as f64)
        .sum::<f64>()
        / runs as f64;
    assert!((with_loops - seed.expected_edges()).abs() < 0.5);
}

fn graph_strategy() -> impl Strategy<Value = (usize, Vec<bool>, Vec<f64>)> {
    (3usize..7).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec(any::<bool>(), n * n),
            proptest::collection::vec(-5.0f64..5.0, n * n),
        )
    })
}

fn rankings_strategy() -> impl Strategy<Value = (Vec<Vec<usize>>, Vec<usize>)> {
    (2usize..8).prop_flat_map(|l| {
        proptest::collection::vec((Just((0..l).collect::<Vec<_>>()).prop_shuffle(), 0..l), 1..30)
            .prop_map(|rows| rows.into_iter().unzip())
    })
}

proptest! {
    #[test]
    fn auc_ignores_monotone_transforms((n, edges, scores) in graph_strategy()) {
        let g = SocialGraph::from_edges(
            n,
            (0..n * n).filter(|&i| edges[i] && i / n != i % n).map(|i| (i / n, i % n)),
        ).unwrap();
        let base = edge_auc(&scores, &g);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        let squashed: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| 3.0 * s * s * s + 1.0).collect();
        prop_assert!((edge_auc(&squashed, &g).unwrap() - base).abs() < 1e-12);
        prop_assert!((edge_auc(&cubed, &g).unwrap() - base).abs() < 1e-12);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((edge_auc(&flipped, &g).unwrap() - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn ranking_metrics_grow_with_k((rankings, truths) in rankings_strategy()) {
        let l = rankings[0].len();
        let mut prev = (0.0, 0.0);
        for k in 1..=l {
            let acc = accuracy_at_k(&rankings, &truths, k).unwrap();
            let ndcg = ndcg_at_k(&rankings, &truths, k, NdcgMode::Corrected).unwrap();
            prop_assert!(acc >= prev.0 && ndcg >= prev.1);
            prop_assert!(ndcg <= acc + 1e-15);
            prev = (acc, ndcg);
        }
        prop_assert!((prev.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn split_keeps_every_event_once(seed in 0u64..500, frac in 0.05f64..0.95) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (log, _, _, _) = common::random_spatial_state(&mut rng);
        prop_assume!(log.len() >= 2);
        if let Ok((train, test)) = log.split(frac) {
            let joined: Vec<Checkin> = train.events().iter().chain(test.events()).copied().collect();
            prop_assert_eq!(joined.as_slice(), log.events());
            prop_assert!(train.events().iter().all(|e| e.t < train.horizon()));
        }
    }

    #[test]
    fn filtration_grows_with_time(seed in 0u64..500, a in 0.0f64..50.0, b in 0.0f64..50.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (log, _, _, _) = common::random_spatial_state(&mut rng);
        let (s, t) = if a <= b { (a, b) } else { (b, a) };
        let f = Filter::any().user(0);
        let early = log.filtration(s, &f).unwrap();
        let late = log.filtration(t, &f).unwrap();
        prop_assert!(early.iter().all(|e| late.contains(e)));
        prop_assert!(late.len() <= log.filtration(t, &Filter::any()).unwrap().len());
    }
}
