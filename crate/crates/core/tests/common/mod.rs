//! Oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use checkins::experiment::{generate, interevent_for_beta, SyntheticConfig};
use checkins::graphs::ParamRanges;
use checkins::inference::{
    e_step_data, expected_complete_loglik, initial_params, log_likelihood, user_objective, TrainingData, UserProblem,
};
use checkins::simulate::{simulate, StopRule};
use checkins::spatial::{compute_weights, gamma, location_distribution, Source};
use checkins::temporal::IntensityContext;
use checkins::{Checkin, EventLog, HyperParams, LocationLayout, ModelParams};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

pub type Check<T> = Result<T, String>;

pub fn small_instance(seed: u64) -> (EventLog, HyperParams) {
    let cfg = SyntheticConfig {
        power: 2,
        locations_per_category: 2,
        n_events: 60,
        seed,
        ..SyntheticConfig::default()
    };
    let inst = generate(&cfg).unwrap();
    (inst.log, inst.hyper)
}

pub fn random_params(data: &TrainingData, rng: &mut ChaCha20Rng) -> ModelParams {
    let mut p = initial_params(data, rng);
    for u in 0..data.n_users {
        for &v in &data.support[u] {
            p.set_alpha(v, u, rng.random_range(0.01..1.0));
        }
    }
    p
}

pub fn gradient(problem: &UserProblem<'_>, theta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    problem.value_grad(theta, &mut g);
    g
}

/// Largest relative gap between the analytic gradient and central
/// differences (step `1e-5`) over `instances` random problems.
pub fn gradient_check(instances: u64) -> Check<f64> {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        let (log, hyper) = small_instance(seed);
        let data = TrainingData::new(&log, &hyper, None).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1000 + seed);
        let resp = e_step_data(&data, &random_params(&data, &mut rng)).unwrap();
        let at = random_params(&data, &mut rng);
        let u = (seed as usize) % data.n_users;
        let problem = UserProblem::new(&data, &resp, u);
        let theta = problem.pack(&at);
        let (_, grad) = user_objective(&data, &resp, u, &theta).map_err(|e| e.to_string())?;
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (problem.value(&plus) - problem.value(&minus)) / (2.0 * h);
            // relative, with a floor for coordinates whose gradient is near zero
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-2);
            worst = worst.max(rel);
            if rel > 1e-4 {
                return Err(format!("instance {seed}, user {u}, coordinate {i}: analytic {} vs {fd}", grad[i]));
            }
        }
    }
    Ok(worst)
}

/// Largest eigenvalue of the symmetrized numeric Hessian over `points`
/// random feasible points.
pub fn hessian_check(points: u64) -> Check<f64> {
    let h = 1e-5;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..points {
        let (log, hyper) = small_instance(200 + seed);
        let data = TrainingData::new(&log, &hyper, None).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let resp = e_step_data(&data, &random_params(&data, &mut rng)).unwrap();
        let at = random_params(&data, &mut rng);
        let u = (seed as usize) % data.n_users;
        let problem = UserProblem::new(&data, &resp, u);
        let theta = problem.pack(&at);
        let d = theta.len();
        let mut hess = DMatrix::<f64>::zeros(d, d);
        for j in 0..d {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[j] += h;
            minus[j] -= h;
            let (gp, gm) = (gradient(&problem, &plus), gradient(&problem, &minus));
            for i in 0..d {
                hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let sym = (&hess + hess.transpose()) * 0.5;
        let max = sym.symmetric_eigen().eigenvalues.max();
        worst = worst.max(max);
        if max > 1e-6 {
            return Err(format!("point {seed}: max eigenvalue {max}"));
        }
    }
    Ok(worst)
}

/// Largest relative gap between the summed event-major objective and the
/// per-user objectives.
pub fn decomposition_check(instances: u64) -> Check<f64> {
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        let (log, hyper) = small_instance(500 + seed);
        let data = TrainingData::new(&log, &hyper, None).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let resp = e_step_data(&data, &random_params(&data, &mut rng)).unwrap();
        let at = random_params(&data, &mut rng);
        let total = expected_complete_loglik(&data, &resp, &at);
        let by_user: f64 = (0..data.n_users)
            .map(|u| {
                let theta = UserProblem::new(&data, &resp, u).pack(&at);
                user_objective(&data, &resp, u, &theta).unwrap().0
            })
            .sum();
        let rel = (total - by_user).abs() / total.abs().max(1.0);
        worst = worst.max(rel);
        if rel > 1e-10 {
            return Err(format!("instance {seed}: {total} vs {by_user}"));
        }
    }
    Ok(worst)
}

// Direct evaluation of intensity, location probability and compensator from
// their definitions, with the compensator by composite Simpson quadrature.

fn h(x: f64, hyper: &HyperParams) -> f64 {
    if x.abs() <= hyper.tau / 2.0 {
        (-x * x / (2.0 * hyper.sigma * hyper.sigma)).exp()
    } else {
        0.0
    }
}

fn brute_intensity(events: &[Checkin], p: &ModelParams, hyper: &HyperParams, u: usize, c: usize, t: f64) -> f64 {
    let mut x = 0.0;
    for e in events.iter().filter(|e| e.user == u && e.category == c && e.t < t) {
        let k = ((t - e.t) / hyper.tau).floor();
        if k >= 1.0 && k <= hyper.max_periods as f64 {
            x += h(t - e.t - k * hyper.tau, hyper) * (-k).exp();
        }
    }
    p.mu(u, c) + p.beta(u) * x
}

fn brute_location(
    events: &[Checkin],
    layout: &LocationLayout,
    p: &ModelParams,
    hyper: &HyperParams,
    e: &Checkin,
) -> f64 {
    let past: Vec<&Checkin> = events.iter().filter(|x| x.t < e.t).collect();
    let decay = |x: &Checkin| (-hyper.spatial_decay * (e.t - x.t)).exp();
    let w = |l: usize| past.iter().filter(|x| x.location == l).map(|x| p.alpha(x.user, e.user) * decay(x)).sum::<f64>();
    let m = |l: usize| past.iter().filter(|x| x.location == l).map(|x| decay(x)).sum::<f64>();
    let locs = layout.locations_of(e.category);
    let w_all: f64 = locs.iter().map(|&l| w(l)).sum();
    let m_all: f64 = locs.iter().map(|&l| m(l)).sum();
    let rho = hyper.popularity_prior;
    let g0 = if m_all + rho * locs.len() as f64 > 0.0 {
        (m(e.location) + rho) / (m_all + rho * locs.len() as f64)
    } else {
        1.0 / locs.len() as f64
    };
    let eta = p.eta(e.user, e.category);
    (w(e.location) + eta * g0) / (eta + w_all)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let step = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * step / 3.0
}

fn brute_loglik(log: &EventLog, p: &ModelParams, hyper: &HyperParams) -> f64 {
    let events = log.events();
    let mut ll = 0.0;
    for e in events {
        ll += brute_intensity(events, p, hyper, e.user, e.category, e.t).ln();
        ll += brute_location(events, log.layout(), p, hyper, e).ln();
    }
    // breakpoints where a floor jump occurs
    let mut cuts = vec![0.0, log.horizon()];
    for e in events {
        for k in 1..=hyper.max_periods {
            let x = e.t + k as f64 * hyper.tau;
            for y in [x, x + hyper.tau / 2.0] {
                if y < log.horizon() {
                    cuts.push(y);
                }
            }
        }
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    for u in 0..log.n_users() {
        for c in 0..log.n_categories() {
            for w in cuts.windows(2) {
                if w[1] > w[0] {
                    // stay inside the open piece so endpoints see no jump
                    let pad = 1e-12 * (w[1] - w[0]);
                    ll -= simpson(|t| brute_intensity(events, p, hyper, u, c, t), w[0] + pad, w[1] - pad, 4000);
                }
            }
        }
    }
    ll
}

/// Relative gap between the closed-form likelihood and the brute-force
/// evaluation on two five-event logs (2 users, 1 category, 2 locations).
pub fn brute_force_check() -> Check<f64> {
    let layout = LocationLayout::uniform(1, 2);
    let mut worst: f64 = 0.0;
    for hyper in [HyperParams::default(), HyperParams { popularity_prior: 1.0, ..HyperParams::default() }] {
        // without the prior a first visit after any history has probability zero
        let other = if hyper.popularity_prior > 0.0 { 1 } else { 0 };
        let events = vec![
            Checkin::new(1.0, 0, 0, 0),
            Checkin::new(1.4, 1, 0, 0),
            Checkin::new(13.2, 0, 0, 0),
            Checkin::new(13.5, 1, 0, other),
            Checkin::new(26.1, 0, 0, other),
        ];
        let log = EventLog::new(2, layout.clone(), events, 40.0).unwrap();
        let mut p = ModelParams::zeros(2, 1);
        p.set_mu(0, 0, 0.05);
        p.set_mu(1, 0, 0.02);
        p.set_beta(0, 0.7);
        p.set_beta(1, 0.3);
        p.set_eta(0, 0, 0.2);
        p.set_eta(1, 0, 0.05);
        p.set_alpha(0, 1, 0.8);
        p.set_alpha(1, 0, 0.3);
        p.set_alpha(0, 0, 0.4);
        let data = TrainingData::new(&log, &hyper, None).unwrap();
        let fast = log_likelihood(&data, &p).unwrap();
        let slow = brute_loglik(&log, &p, &hyper);
        let rel = (fast - slow).abs() / slow.abs();
        worst = worst.max(rel);
        if !(rel <= 1e-6) {
            return Err(format!("prior {}: {fast} vs {slow}", hyper.popularity_prior));
        }
    }
    Ok(worst)
}

pub fn one_stream(mu: f64, beta: f64, horizon: f64, seed: u64) -> (EventLog, ModelParams) {
    let mut p = ModelParams::zeros(1, 1);
    p.set_mu(0, 0, mu);
    p.set_beta(0, beta);
    p.set_eta(0, 0, 1.0);
    let log = simulate(
        &p,
        &HyperParams::default(),
        &LocationLayout::uniform(1, 1),
        StopRule::horizon(horizon),
        &mut ChaCha20Rng::seed_from_u64(seed),
    )
    .unwrap();
    (log, p)
}

/// Asymptotic Kolmogorov p-value of a one-sample KS statistic.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let x = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * x * x).exp();
    }
    p.clamp(0.0, 1.0)
}

pub fn ks_exponential(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = 1.0 - (-x).exp();
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    ks_pvalue(d, xs.len())
}

pub fn rescaled_gaps(log: &EventLog, params: &ModelParams, hyper: &HyperParams) -> Vec<f64> {
    let ctx = IntensityContext::new(log, params, hyper).unwrap();
    let mut gaps = Vec::new();
    for u in 0..log.n_users() {
        for c in 0..log.n_categories() {
            let mut prev = 0.0;
            for &t in log.user_category_times(u, c) {
                gaps.push(ctx.intensity_integral(u, c, prev, t).unwrap());
                prev = t;
            }
        }
    }
    gaps
}

/// χ² goodness-of-fit p-value of window counts of a `β = 0` stream
/// against the Poisson law.
pub fn poisson_pvalue() -> f64 {
    let (rate, width, windows) = (0.5, 10.0, 400usize);
    let (log, _) = one_stream(rate, 0.0, width * windows as f64, 11);
    let mut counts = vec![0usize; windows];
    for e in log.events() {
        counts[(e.t / width) as usize] += 1;
    }
    // cells 0..=2, 3, ..., 8, >= 9 keep every expected count above 5
    let pois = Poisson::new(rate * width).unwrap();
    let cell = |k: usize| k.clamp(2, 9) - 2;
    let mut observed = [0.0; 8];
    for &k in &counts {
        observed[cell(k)] += 1.0;
    }
    let mut expected = [0.0; 8];
    for k in 0..200u64 {
        expected[cell(k as usize)] += windows as f64 * pois.pmf(k);
    }
    assert!(expected.iter().all(|&e| e >= 5.0));
    let stat: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    1.0 - ChiSquared::new(7.0).unwrap().cdf(stat)
}

/// KS p-values of rescaled gaps: one excited stream, then a desk-scale
/// instance with `β ~ U(0.5, 1)`.
pub fn rescaling_pvalues() -> (f64, f64) {
    let (log, p) = one_stream(0.05, 0.8, 30_000.0, 5);
    let single = ks_exponential(rescaled_gaps(&log, &p, &HyperParams::default()));
    let cfg = SyntheticConfig {
        ranges: ParamRanges { beta: (0.5, 1.0), ..ParamRanges::default() },
        seed: 21,
        ..SyntheticConfig::default()
    };
    let inst = generate(&cfg).unwrap();
    let desk = ks_exponential(rescaled_gaps(&inst.log, &inst.truth, &inst.hyper));
    (single, desk)
}

/// `β = 1`: mode in the bin starting at 12. `β = 0`: mode at 0 and 6-hour
/// block counts over two days never increase.
pub fn interevent_check() -> Check<String> {
    let base = SyntheticConfig::default();
    let high = interevent_for_beta(&base, 1.0, 1.0).unwrap();
    let flat = interevent_for_beta(&base, 0.0, 1.0).unwrap();
    let blocks: Vec<u64> = flat.counts.chunks(6).take(8).map(|b| b.iter().sum()).collect();
    let summary = format!("beta=1 mode bin {:?}, beta=0 mode bin {:?}, beta=0 blocks {blocks:?}", high.mode_bin(), flat.mode_bin());
    let ok = high.mode_bin() == Some(12)
        && flat.mode_bin() == Some(0)
        && blocks.windows(2).all(|w| w[1] <= w[0]);
    if ok { Ok(summary) } else { Err(summary) }
}

pub fn random_spatial_state(rng: &mut ChaCha20Rng) -> (EventLog, ModelParams, HyperParams, f64) {
    let n = rng.random_range(1..6);
    let n_cat = rng.random_range(1..4);
    let per = rng.random_range(1..5);
    let layout = LocationLayout::uniform(n_cat, per);
    let horizon = 50.0;
    let events: Vec<Checkin> = (0..rng.random_range(0..40))
        .map(|_| {
            let l = rng.random_range(0..layout.n_locations());
            Checkin::new(rng.random_range(0.0..horizon), rng.random_range(0..n), layout.category_of(l), l)
        })
        .collect();
    let log = EventLog::new(n, layout, events, horizon).unwrap();
    let mut p = ModelParams::zeros(n, n_cat);
    for u in 0..n {
        for c in 0..n_cat {
            // some zero η to exercise pure exploitation
            p.set_eta(u, c, if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..2.0) });
        }
        for v in 0..n {
            if rng.random_bool(0.6) {
                p.set_alpha(v, u, rng.random_range(0.0..3.0));
            }
        }
    }
    let hyper = HyperParams {
        popularity_prior: if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..2.0) },
        spatial_decay: rng.random_range(0.1..3.0),
        ..HyperParams::default()
    };
    let t = rng.random_range(0.0..horizon);
    (log, p, hyper, t)
}

/// Worst deviation of `Σ_l f` from 1 and of `Σ_v γ^v` from `f` over
/// `states` random (state, user, category) triples.
pub fn spatial_check(states: usize) -> Check<(f64, f64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let (mut norm, mut marg): (f64, f64) = (0.0, 0.0);
    let mut seen = 0;
    while seen < states {
        let (log, p, hyper, t) = random_spatial_state(&mut rng);
        let weights = compute_weights(&log, &hyper, t).unwrap();
        for u in 0..log.n_users() {
            for c in 0..log.n_categories() {
                let Ok(dist) = location_distribution(&weights, &p, u, c) else {
                    continue;
                };
                seen += 1;
                norm = norm.max((dist.probs.iter().sum::<f64>() - 1.0).abs());
                for &l in log.layout().locations_of(c) {
                    let mut g = gamma(&weights, &p, u, c, l, Source::Exploration).unwrap();
                    for v in 0..log.n_users() {
                        g += gamma(&weights, &p, u, c, l, Source::User(v)).unwrap();
                    }
                    marg = marg.max((g - dist.probs[l]).abs());
                }
            }
        }
    }
    if norm < 1e-12 && marg < 1e-12 {
        Ok((norm, marg))
    } else {
        Err(format!("normalization gap {norm:e}, marginalization gap {marg:e}"))
    }
}

/// The worked metric examples plus the randomized ones: random AUC near
/// 1/2, MSE against a direct loop, likelihood dominance of the truth,
/// window monotonicity of sociality.
pub fn metric_examples_check() -> Check<String> {
    use checkins::metrics::*;
    use checkins::SocialGraph;
    let fail = |m: &str| Err(m.to_string());

    // AUC of scores independent of a random graph
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let mut aucs = Vec::new();
    for _ in 0..1000 {
        let n = 12;
        let g = SocialGraph::from_edges(
            n,
            (0..n * n).filter(|&i| i / n != i % n && rng.random_bool(0.3)).map(|i| (i / n, i % n)),
        )
        .unwrap();
        let scores: Vec<f64> = (0..n * n).map(|_| rng.random()).collect();
        aucs.push(edge_auc(&scores, &g).unwrap());
    }
    let mean_auc = aucs.iter().sum::<f64>() / aucs.len() as f64;
    if (mean_auc - 0.5).abs() > 0.05 {
        return fail(&format!("random AUC mean {mean_auc}"));
    }

    // MSE against a loop over every entry
    let a = random_params_of(5, 2, &mut rng);
    let b = random_params_of(5, 2, &mut rng);
    let mut sse = 0.0;
    let mut count = 0;
    for u in 0..5 {
        for c in 0..2 {
            sse += (a.mu(u, c) - b.mu(u, c)).powi(2) + (a.eta(u, c) - b.eta(u, c)).powi(2);
            count += 2;
        }
        sse += (a.beta(u) - b.beta(u)).powi(2);
        count += 1;
        for v in 0..5 {
            sse += (a.alpha(v, u) - b.alpha(v, u)).powi(2);
            count += 1;
        }
    }
    if (param_mse(&a, &b).unwrap() - sse / count as f64).abs() > 1e-15 {
        return fail("MSE disagrees with the direct loop");
    }
    let mut off = a.clone();
    off.set_beta(0, a.beta(0) + 0.1);
    if (param_mse(&off, &a).unwrap() - 0.01 / count as f64).abs() > 1e-15 {
        return fail("single-entry MSE example");
    }

    // held-out likelihood of the truth against a perturbed copy
    let mut wins = 0;
    for seed in 0..20 {
        let inst = generate(&SyntheticConfig { power: 3, n_events: 600, seed, ..SyntheticConfig::default() }).unwrap();
        let start = inst.test_start().unwrap();
        let mut noisy = inst.truth.clone();
        let mut r = ChaCha20Rng::seed_from_u64(seed);
        let n = noisy.n_users();
        for u in 0..n {
            noisy.set_beta(u, noisy.beta(u) * r.random_range(0.5..1.5));
            for c in 0..noisy.n_categories() {
                noisy.set_mu(u, c, noisy.mu(u, c) * r.random_range(0.5..1.5));
                noisy.set_eta(u, c, noisy.eta(u, c) * r.random_range(0.5..1.5));
            }
            for v in 0..n {
                noisy.set_alpha(v, u, noisy.alpha(v, u) * r.random_range(0.5..1.5));
            }
        }
        let t = avg_pred_loglik(&inst.truth, &inst.hyper, &inst.log, start).unwrap();
        let p = avg_pred_loglik(&noisy, &inst.hyper, &inst.log, start).unwrap();
        wins += usize::from(t > p);
    }
    if wins <= 10 {
        return fail(&format!("truth beats perturbed parameters in only {wins}/20 seeds"));
    }

    // sociality grows with the window
    let inst = generate(&SyntheticConfig::default()).unwrap();
    let full = sociality(&inst.log, &inst.graph, None, FriendDirection::In).unwrap();
    let mut prev = vec![Some(0.0); full.len()];
    for w in [1.0, 24.0, 168.0, f64::INFINITY] {
        let s = sociality(&inst.log, &inst.graph, Some(w), FriendDirection::In).unwrap();
        for (x, y) in prev.iter().zip(&s) {
            if let (Some(x), Some(y)) = (x, y) {
                if y < x {
                    return fail("sociality shrank with a wider window");
                }
            }
        }
        prev = s;
    }
    if prev != full {
        return fail("an unbounded window differs from full history");
    }

    // worked ranking examples
    let rankings = vec![vec![4, 5, 6, 7, 8, 9, 10], vec![5, 6, 4, 7, 8, 9, 10], vec![5, 6, 7, 8, 9, 10, 4]];
    if (accuracy_at_k(&rankings, &[4, 4, 4], 3).unwrap() - 2.0 / 3.0).abs() > 1e-15
        || accuracy_at_k(&rankings, &[4, 4, 4], 7).unwrap() != 1.0
        || ndcg_at_k(&[vec![1, 2, 3]], &[1], 2, NdcgMode::Corrected).unwrap() != 1.0
        || (ndcg_at_k(&[vec![1, 2, 3, 4]], &[3], 4, NdcgMode::Corrected).unwrap() - 0.5).abs() > 1e-15
        || ndcg_at_k(&[vec![1, 2, 3]], &[3], 2, NdcgMode::Corrected).unwrap() != 0.0
    {
        return fail("ranking examples");
    }
    Ok(format!("random AUC mean {mean_auc:.4}, truth wins {wins}/20"))
}

pub fn random_params_of(n: usize, n_cat: usize, rng: &mut ChaCha20Rng) -> ModelParams {
    let mut p = ModelParams::zeros(n, n_cat);
    for u in 0..n {
        p.set_beta(u, rng.random());
        for c in 0..n_cat {
            p.set_mu(u, c, rng.random());
            p.set_eta(u, c, rng.random());
        }
        for v in 0..n {
            p.set_alpha(v, u, rng.random());
        }
    }
    p
}
