//! Comparison models: exponential-kernel Hawkes processes for check-in
//! times, and count-based location rankings.
//!
//! `Hawkes` excites each (user, category) stream by its own history;
//! `MultiHawkes` also by the history of the user's in-neighbours in the
//! same category:
//!
//! ```text
//! λ_u(t, c) = μ_uc + Σ_{v ∈ S(u)} a_vu Σ_{t_j ∈ D_vc(t)} exp(−(t − t_j))
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{maximize, OptimConfig};
use crate::log::EventLog;
use crate::model::{HyperParams, ModelParams, SocialGraph};
use crate::predict::rank_by_score;
use crate::temporal::IntensityContext;

/// Conditional intensity of a temporal model, with history taken from the
/// log strictly before `t`.
pub trait TemporalIntensity {
    fn intensity(&self, log: &EventLog, u: usize, c: usize, t: f64) -> f64;
    /// `∫_a^b λ_u(s, c) ds`.
    fn integral(&self, log: &EventLog, u: usize, c: usize, a: f64, b: f64) -> f64;
}

/// The periodic model seen as a [`TemporalIntensity`].
#[derive(Debug, Clone, Copy)]
pub struct Periodic<'a> {
    pub params: &'a ModelParams,
    pub hyper: &'a HyperParams,
}

impl TemporalIntensity for Periodic<'_> {
    fn intensity(&self, log: &EventLog, u: usize, c: usize, t: f64) -> f64 {
        IntensityContext { log, params: self.params, hyper: self.hyper }.intensity_unchecked(u, c, t)
    }

    fn integral(&self, log: &EventLog, u: usize, c: usize, a: f64, b: f64) -> f64 {
        IntensityContext { log, params: self.params, hyper: self.hyper }.integral_unchecked(u, c, a, b)
    }
}

// exp(−x) is below 1e−300 past this lag
const MAX_LAG: f64 = 700.0;

fn decayed_sum(times: &[f64], t: f64) -> f64 {
    let end = times.partition_point(|&x| x < t);
    let start = times.partition_point(|&x| x < t - MAX_LAG);
    times[start..end].iter().map(|&x| (x - t).exp()).sum()
}

/// `Σ_j ∫_a^b exp(−(s − t_j)) 1{s > t_j} ds`
fn decayed_integral(times: &[f64], a: f64, b: f64) -> f64 {
    let end = times.partition_point(|&x| x < b);
    let start = times.partition_point(|&x| x < a - MAX_LAG);
    times[start..end]
        .iter()
        .map(|&tj| {
            let lo = a.max(tj);
            (tj - lo).exp() - (tj - b).exp()
        })
        .sum()
}

/// Fitted exponential-kernel Hawkes baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpHawkes {
    pub n_users: usize,
    pub n_categories: usize,
    /// `mu[u * C + c]`
    pub mu: Vec<f64>,
    /// `support[u]`: users whose history excites `u`.
    pub support: Vec<Vec<usize>>,
    /// `weights[u][k]`: excitation weight of `support[u][k]` on `u`.
    pub weights: Vec<Vec<f64>>,
}

impl ExpHawkes {
    /// Zero-excitation model with self-only support.
    pub fn new(n_users: usize, n_categories: usize, support: Vec<Vec<usize>>) -> Result<Self> {
        if support.len() != n_users || support.iter().flatten().any(|&v| v >= n_users) {
            return Err(Error::invalid("Hawkes support does not match N"));
        }
        let weights = support.iter().map(|s| vec![0.0; s.len()]).collect();
        Ok(Self {
            n_users,
            n_categories,
            mu: vec![0.0; n_users * n_categories],
            support,
            weights,
        })
    }

    pub fn self_support(n_users: usize) -> Vec<Vec<usize>> {
        (0..n_users).map(|u| vec![u]).collect()
    }

    /// In-neighbours of `u` in `graph`, plus `u` itself.
    pub fn graph_support(graph: &SocialGraph) -> Vec<Vec<usize>> {
        (0..graph.n())
            .map(|u| {
                let mut s = graph.in_neighbors(u);
                if !s.contains(&u) {
                    s.push(u);
                }
                s.sort_unstable();
                s
            })
            .collect()
    }

    pub fn mu(&self, u: usize, c: usize) -> f64 {
        self.mu[u * self.n_categories + c]
    }

    /// Excitation weight of `v` on `u` (zero off the support).
    pub fn weight(&self, v: usize, u: usize) -> f64 {
        self.support[u]
            .iter()
            .position(|&x| x == v)
            .map_or(0.0, |k| self.weights[u][k])
    }
}

impl TemporalIntensity for ExpHawkes {
    fn intensity(&self, log: &EventLog, u: usize, c: usize, t: f64) -> f64 {
        self.mu(u, c)
            + self.support[u]
                .iter()
                .zip(&self.weights[u])
                .map(|(&v, &w)| w * decayed_sum(log.user_category_times(v, c), t))
                .sum::<f64>()
    }

    fn integral(&self, log: &EventLog, u: usize, c: usize, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.mu(u, c) * (b - a)
            + self.support[u]
                .iter()
                .zip(&self.weights[u])
                .map(|(&v, &w)| w * decayed_integral(log.user_category_times(v, c), a, b))
                .sum::<f64>()
    }
}

/// Per-user log-likelihood `−Σ_c μ_c T − Σ_k a_k Φ_k + Σ_i ln(μ_{c_i} + Σ_k a_k x_ik)`,
/// concave in `(μ, a)`.
struct HawkesProblem {
    n_categories: usize,
    horizon: f64,
    /// `Φ_k = Σ_c ∫_0^T` of source `k`'s kernels in category `c`.
    compensator: Vec<f64>,
    events: Vec<(usize, Vec<(usize, f64)>)>,
}

impl HawkesProblem {
    fn build(log: &EventLog, u: usize, support: &[usize]) -> Self {
        let n_cat = log.n_categories();
        let horizon = log.horizon();
        let compensator = support
            .iter()
            .map(|&v| {
                (0..n_cat)
                    .map(|c| decayed_integral(log.user_category_times(v, c), 0.0, horizon))
                    .sum()
            })
            .collect();
        let events = log
            .user_event_indices(u)
            .iter()
            .map(|&i| {
                let e = log.events()[i];
                let x = support
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| (k, decayed_sum(log.user_category_times(v, e.category), e.t)))
                    .filter(|&(_, x)| x > 0.0)
                    .collect();
                (e.category, x)
            })
            .collect();
        Self {
            n_categories: n_cat,
            horizon,
            compensator,
            events,
        }
    }

    fn value_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let n_cat = self.n_categories;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for c in 0..n_cat {
            value -= theta[c] * self.horizon;
            grad[c] -= self.horizon;
        }
        for (k, &phi) in self.compensator.iter().enumerate() {
            value -= theta[n_cat + k] * phi;
            grad[n_cat + k] -= phi;
        }
        for (c, x) in &self.events {
            let lambda = theta[*c] + x.iter().map(|&(k, xk)| theta[n_cat + k] * xk).sum::<f64>();
            if !(lambda > 0.0) {
                return f64::NEG_INFINITY;
            }
            value += lambda.ln();
            grad[*c] += 1.0 / lambda;
            for &(k, xk) in x {
                grad[n_cat + k] += xk / lambda;
            }
        }
        value
    }
}

/// Fit `μ` and the excitation weights by maximum likelihood, one user at a
/// time, from the starting value `init` for every coordinate.
pub fn fit_hawkes_with_support(
    log: &EventLog,
    support: Vec<Vec<usize>>,
    optim: &OptimConfig,
    lower_bound: f64,
    init: f64,
) -> Result<ExpHawkes> {
    if log.is_empty() {
        return Err(Error::invalid("cannot fit an empty training log"));
    }
    let mut model = ExpHawkes::new(log.n_users(), log.n_categories(), support)?;
    let n_cat = log.n_categories();
    let solved: Vec<Vec<f64>> = (0..log.n_users())
        .into_par_iter()
        .map(|u| {
            let problem = HawkesProblem::build(log, u, &model.support[u]);
            let dim = n_cat + model.support[u].len();
            let x0 = vec![init.max(lower_bound); dim];
            let lower = vec![lower_bound; dim];
            maximize(|x, g| problem.value_grad(x, g), &x0, &lower, optim).x
        })
        .collect();
    for (u, theta) in solved.into_iter().enumerate() {
        model.mu[u * n_cat..(u + 1) * n_cat].copy_from_slice(&theta[..n_cat]);
        model.weights[u].copy_from_slice(&theta[n_cat..]);
    }
    Ok(model)
}

/// Hawkes baseline: each stream excited by its own history only.
pub fn fit_hawkes(log: &EventLog, optim: &OptimConfig) -> Result<ExpHawkes> {
    fit_hawkes_with_support(log, ExpHawkes::self_support(log.n_users()), optim, 1e-8, 0.05)
}

/// MultiHawkes baseline: excited by the user's and its in-neighbours' history.
pub fn fit_multihawkes(log: &EventLog, graph: &SocialGraph, optim: &OptimConfig) -> Result<ExpHawkes> {
    if graph.n() != log.n_users() {
        return Err(Error::invalid("graph size does not match the log"));
    }
    fit_hawkes_with_support(log, ExpHawkes::graph_support(graph), optim, 1e-8, 0.05)
}

/// Category locations by check-in count strictly before `t`; ties by id.
pub fn most_popular_rank(log: &EventLog, c: usize, t: f64) -> Result<Vec<(usize, f64)>> {
    if c >= log.n_categories() {
        return Err(Error::invalid(format!("category {c} out of range")));
    }
    let mut counts = vec![0.0; log.n_locations()];
    for e in log.events().iter().take_while(|e| e.t < t) {
        if e.category == c {
            counts[e.location] += 1.0;
        }
    }
    Ok(rank_by_score(
        log.layout().locations_of(c).iter().map(|&l| (l, counts[l])).collect(),
    ))
}

/// Circular distance between the phases of `a` and `b` modulo `tau`.
fn phase_distance(a: f64, b: f64, tau: f64) -> f64 {
    let d = (a - b).rem_euclid(tau);
    d.min(tau - d)
}

/// `u`'s category locations by the number of its own earlier check-ins whose
/// phase `t mod τ` lies within `window / 2` of the phase of `t` (inclusive);
/// ties by id.
pub fn periodic_loc_rank(
    log: &EventLog,
    u: usize,
    c: usize,
    t: f64,
    tau: f64,
    window: f64,
) -> Result<Vec<(usize, f64)>> {
    if u >= log.n_users() || c >= log.n_categories() {
        return Err(Error::invalid(format!("(user {u}, category {c}) out of range")));
    }
    if !(tau > 0.0 && window >= 0.0) {
        return Err(Error::invalid("PeriodicLoc needs tau > 0 and window >= 0"));
    }
    let mut counts = vec![0.0; log.n_locations()];
    for &i in log.user_event_indices(u) {
        let e = log.events()[i];
        if e.t >= t {
            break;
        }
        if e.category == c && phase_distance(e.t, t, tau) <= window / 2.0 + 1e-12 {
            counts[e.location] += 1.0;
        }
    }
    Ok(rank_by_score(
        log.layout().locations_of(c).iter().map(|&l| (l, counts[l])).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Checkin, LocationLayout};
    use approx::assert_relative_eq;

    fn log_of(events: Vec<Checkin>, n: usize, horizon: f64) -> EventLog {
        EventLog::new(n, LocationLayout::uniform(1, 3), events, horizon).unwrap()
    }

    #[test]
    fn hawkes_intensity_examples() {
        let log = log_of(vec![Checkin::new(4.0, 0, 0, 0)], 1, 10.0);
        let mut h = ExpHawkes::new(1, 1, ExpHawkes::self_support(1)).unwrap();
        h.mu[0] = 0.2;
        assert_eq!(h.intensity(&log, 0, 0, 3.0), 0.2);
        h.weights[0][0] = 1.0;
        assert_relative_eq!(h.intensity(&log, 0, 0, 5.0), 0.2 + (-1.0f64).exp(), epsilon = 1e-15);
        // integral of e^{−(s−4)} over [4, 6] is 1 − e^{−2}
        assert_relative_eq!(
            h.integral(&log, 0, 0, 0.0, 6.0),
            0.2 * 6.0 + 1.0 - (-2.0f64).exp(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn multihawkes_friend_event() {
        let log = log_of(vec![Checkin::new(1.0, 1, 0, 2)], 2, 10.0);
        let g = SocialGraph::from_edges(2, [(1, 0)]).unwrap();
        let mut h = ExpHawkes::new(2, 1, ExpHawkes::graph_support(&g)).unwrap();
        h.mu = vec![0.1, 0.1];
        h.weights[0] = vec![0.5, 0.5];
        h.weights[1] = vec![0.5];
        assert_relative_eq!(h.intensity(&log, 0, 0, 3.0), 0.1 + 0.5 * (-2.0f64).exp(), epsilon = 1e-15);
        // user 1 has no in-neighbours, user 0's history is not in its support
        assert_eq!(h.support[1], vec![1]);
        assert_eq!(h.weight(0, 1), 0.0);
    }

    #[test]
    fn most_popular_examples() {
        let log = log_of(vec![], 1, 10.0);
        let ids: Vec<usize> = most_popular_rank(&log, 0, 5.0).unwrap().iter().map(|x| x.0).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        let mut evs = Vec::new();
        let mut t = 0.0;
        for (l, n) in [(2usize, 5), (0, 3), (1, 1)] {
            for _ in 0..n {
                t += 0.5;
                evs.push(Checkin::new(t, 0, 0, l));
            }
        }
        let log = log_of(evs, 1, 10.0);
        let r = most_popular_rank(&log, 0, 9.9).unwrap();
        assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![2, 0, 1]);
        assert_eq!(r.iter().map(|x| x.1).collect::<Vec<_>>(), vec![5.0, 3.0, 1.0]);
    }

    #[test]
    fn periodic_loc_examples() {
        let log = log_of(vec![Checkin::new(1.0, 0, 0, 2)], 1, 100.0);
        // 1.0 is out of phase with 18.0 (mod 12: 1 vs 6)
        let r = periodic_loc_rank(&log, 0, 0, 18.0, 12.0, 1.0).unwrap();
        assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1, 2]);
        let r = periodic_loc_rank(&log, 0, 0, 13.2, 12.0, 1.0).unwrap();
        assert_eq!(r[0], (2, 1.0));
        // boundary: phase distance exactly window / 2 counts
        let r = periodic_loc_rank(&log, 0, 0, 13.5, 12.0, 1.0).unwrap();
        assert_eq!(r[0], (2, 1.0));
        let r = periodic_loc_rank(&log, 0, 0, 13.6, 12.0, 1.0).unwrap();
        assert_eq!(r[0], (0, 0.0));
        // phases wrap around the period
        let log = log_of(vec![Checkin::new(11.8, 0, 0, 1)], 1, 100.0);
        let r = periodic_loc_rank(&log, 0, 0, 24.1, 12.0, 1.0).unwrap();
        assert_eq!(r[0], (1, 1.0));
    }
}
