//! EM iterations: closed-form responsibilities, then one concave problem per
//! user solved in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::EventLog;
use crate::model::{HyperParams, ModelParams, SocialGraph};
use crate::spatial::Source;

use super::features::TrainingData;
use super::objective::UserProblem;
use super::optim::{maximize, OptimConfig};

/// How to pin the scale of `(α_·u, η_u·)`, which the location likelihood
/// cannot identify: multiplying all of a user's `α` and `η` by one constant
/// leaves every `f_u(l | c, t)` unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum SpatialGauge {
    /// Leave the scale wherever the optimizer ends.
    #[default]
    Free,
    /// After each M-step rescale so that `Σ_c η_uc = C · value`.
    MeanEta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EMConfig {
    pub max_em_iters: usize,
    /// Stop once the log-likelihood gains less than this in one iteration.
    pub tol: f64,
    pub optim: OptimConfig,
    /// Projection floor for `μ` and `β`.
    pub lower_bound: f64,
    /// Smallest `α`, `η` the optimizer may reach from above.
    pub positive_floor: f64,
    pub gauge: SpatialGauge,
    /// Seed of the random initialization.
    pub init_seed: u64,
    /// Keep the parameters after every iteration.
    pub keep_iterates: bool,
}

impl Default for EMConfig {
    fn default() -> Self {
        Self {
            max_em_iters: 50,
            tol: 1e-4,
            optim: OptimConfig::default(),
            lower_bound: 1e-8,
            positive_floor: 1e-10,
            gauge: SpatialGauge::MeanEta(0.025),
            init_seed: 0,
            keep_iterates: false,
        }
    }
}

impl EMConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.tol,
            self.optim.grad_tol,
            self.lower_bound,
            self.positive_floor,
        ];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::invalid("EM tolerances and bounds must be positive"));
        }
        if self.optim.memory == 0 {
            return Err(Error::invalid("optimizer memory must be positive"));
        }
        if let SpatialGauge::MeanEta(k) = self.gauge {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::invalid("gauge scale must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub hyper: HyperParams,
    /// Observed-data log-likelihood of the initial point and after every iteration.
    pub loglik_trace: Vec<f64>,
    /// Expected complete log-likelihood maximized by each M-step.
    pub expected_trace: Vec<f64>,
    pub em_iters_used: usize,
    /// The improvement threshold was met before `max_em_iters`.
    pub converged: bool,
    /// Whether each user's last inner optimization converged.
    pub user_converged: Vec<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterates: Vec<ModelParams>,
}

/// Posterior source probabilities of one event.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventResponsibility {
    pub explore: f64,
    /// `(v, E[z_iv])`, aligned with the event's `sources` feature.
    pub influence: Vec<(usize, f64)>,
}

/// `E[z_iv]` for every training event.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    users: Vec<Vec<EventResponsibility>>,
    locate: Vec<(usize, usize)>,
}

impl Responsibilities {
    pub fn len(&self) -> usize {
        self.locate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locate.is_empty()
    }

    /// Responsibilities of `u`'s events in time order.
    pub fn user(&self, u: usize) -> &[EventResponsibility] {
        &self.users[u]
    }

    /// Sparse responsibilities of the `i`-th log event: exploration first,
    /// then each influencer with positive weight.
    pub fn for_event(&self, i: usize) -> Vec<(Source, f64)> {
        let (u, k) = self.locate[i];
        let r = &self.users[u][k];
        std::iter::once((Source::Exploration, r.explore))
            .chain(
                r.influence
                    .iter()
                    .filter(|(_, x)| *x > 0.0)
                    .map(|&(v, x)| (Source::User(v), x)),
            )
            .collect()
    }
}

fn user_responsibilities(
    data: &TrainingData,
    params: &ModelParams,
    u: usize,
) -> Result<Vec<EventResponsibility>> {
    let support = &data.support[u];
    data.users[u]
        .iter()
        .map(|ev| {
            let g_explore = params.eta(u, ev.category) * ev.g0;
            let g: Vec<f64> = ev
                .sources
                .iter()
                .map(|&(k, s)| params.alpha(support[k], u) * s)
                .collect();
            let total = g_explore + g.iter().sum::<f64>();
            if !(total > 0.0 && total.is_finite()) {
                return Err(Error::DegenerateEvent {
                    index: ev.index,
                    user: u,
                    location: ev.location,
                });
            }
            Ok(EventResponsibility {
                explore: g_explore / total,
                influence: ev
                    .sources
                    .iter()
                    .zip(g)
                    .map(|(&(k, _), x)| (support[k], x / total))
                    .collect(),
            })
        })
        .collect()
}

/// Responsibilities from precomputed features.
pub fn e_step_data(data: &TrainingData, params: &ModelParams) -> Result<Responsibilities> {
    params.check_dims(data.n_users, data.n_categories)?;
    let users = (0..data.n_users)
        .into_par_iter()
        .map(|u| user_responsibilities(data, params, u))
        .collect::<Result<Vec<_>>>()?;
    Ok(Responsibilities {
        users,
        locate: data.locate.clone(),
    })
}

/// Normalized `γ` shares at each event's own time.
pub fn e_step(log: &EventLog, params: &ModelParams, hyper: &HyperParams) -> Result<Responsibilities> {
    params.validate()?;
    let data = TrainingData::new(log, hyper, None)?;
    e_step_data(&data, params)
}

fn user_loglik(data: &TrainingData, params: &ModelParams, u: usize) -> f64 {
    let support = &data.support[u];
    let beta = params.beta(u);
    let mut ll = 0.0;
    for c in 0..data.n_categories {
        ll -= params.mu(u, c) * data.horizon + beta * data.compensator(u, c);
    }
    for ev in &data.users[u] {
        ll += (params.mu(u, ev.category) + beta * ev.excitation).ln();
        let eta = params.eta(u, ev.category);
        let num = eta * ev.g0
            + ev.sources
                .iter()
                .map(|&(k, s)| params.alpha(support[k], u) * s)
                .sum::<f64>();
        let den = eta
            + ev.exposures
                .iter()
                .map(|&(k, a)| params.alpha(support[k], u) * a)
                .sum::<f64>();
        ll += num.ln() - den.ln();
    }
    ll
}

/// Observed-data log-likelihood of times and locations on `(0, T]`.
pub fn log_likelihood(data: &TrainingData, params: &ModelParams) -> Result<f64> {
    params.check_dims(data.n_users, data.n_categories)?;
    // summed in user order so the result does not depend on the thread count
    let per_user: Vec<f64> = (0..data.n_users)
        .into_par_iter()
        .map(|u| user_loglik(data, params, u))
        .collect();
    Ok(per_user.iter().sum())
}

/// Expected complete log-likelihood summed event by event, independently
/// of the per-user decomposition.
pub fn expected_complete_loglik(
    data: &TrainingData,
    resp: &Responsibilities,
    params: &ModelParams,
) -> f64 {
    let mut total = 0.0;
    for u in 0..data.n_users {
        for c in 0..data.n_categories {
            total -= params.mu(u, c) * data.horizon + params.beta(u) * data.compensator(u, c);
        }
    }
    for &(u, k) in &data.locate {
        let ev = &data.users[u][k];
        let r = &resp.user(u)[k];
        let eta = params.eta(u, ev.category);
        total += (params.mu(u, ev.category) + params.beta(u) * ev.excitation).ln();
        let den = eta
            + ev.exposures
                .iter()
                .map(|&(j, a)| params.alpha(data.support[u][j], u) * a)
                .sum::<f64>();
        if r.explore > 0.0 {
            total += r.explore * (eta * ev.g0 / den).ln();
        }
        for (&(j, s), &(_, rv)) in ev.sources.iter().zip(&r.influence) {
            if rv > 0.0 {
                total += rv * (params.alpha(data.support[u][j], u) * s / den).ln();
            }
        }
    }
    total
}

/// Result of one M-step.
#[derive(Debug, Clone)]
pub struct MStep {
    pub params: ModelParams,
    /// Sum over users of the maximized expected complete log-likelihood.
    pub objective: f64,
    pub converged: Vec<bool>,
}

fn lower_bounds(problem: &UserProblem<'_>, x0: &[f64], config: &EMConfig) -> Vec<f64> {
    let lay = problem.layout();
    let log_floor = config.positive_floor.ln();
    let mut lower = vec![config.lower_bound; lay.dim()];
    for k in 0..lay.n_support {
        let i = lay.alpha(k);
        lower[i] = log_floor.min(x0[i]);
    }
    for c in 0..lay.n_categories {
        let i = lay.eta(c);
        lower[i] = log_floor.min(x0[i]);
    }
    lower
}

/// Move `params` into the optimizer's feasible set: `μ, β ≥ ε`, and free
/// `α`, `η` strictly positive (zeros are raised to the positive floor).
/// Entries off the support are zeroed.
pub fn feasible(data: &TrainingData, params: &ModelParams, config: &EMConfig) -> Result<ModelParams> {
    params.check_dims(data.n_users, data.n_categories)?;
    let mut p = ModelParams::zeros(data.n_users, data.n_categories);
    for u in 0..data.n_users {
        for c in 0..data.n_categories {
            p.set_mu(u, c, params.mu(u, c).max(config.lower_bound));
            p.set_eta(u, c, positive(params.eta(u, c), config.positive_floor));
        }
        p.set_beta(u, params.beta(u).max(config.lower_bound));
        for &v in &data.support[u] {
            p.set_alpha(v, u, positive(params.alpha(v, u), config.positive_floor));
        }
    }
    Ok(p)
}

fn positive(x: f64, floor: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        floor
    }
}

/// Maximize each user's expected complete log-likelihood from `init`.
pub fn m_step(
    data: &TrainingData,
    resp: &Responsibilities,
    init: &ModelParams,
    config: &EMConfig,
) -> Result<MStep> {
    let start = feasible(data, init, config)?;
    let solved: Vec<(Vec<f64>, f64, bool)> = (0..data.n_users)
        .into_par_iter()
        .map(|u| {
            let problem = UserProblem::new(data, resp, u);
            let x0 = problem.pack(&start);
            let lower = lower_bounds(&problem, &x0, config);
            let r = maximize(|x, g| problem.value_grad(x, g), &x0, &lower, &config.optim);
            (r.x, r.value, r.converged)
        })
        .collect();
    let mut params = start;
    let mut objective = 0.0;
    let mut converged = Vec::with_capacity(data.n_users);
    for (u, (theta, value, ok)) in solved.into_iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "M-step objective of user {u} is {value} at θ = {theta:?}"
            )));
        }
        UserProblem::new(data, resp, u).unpack(&theta, &mut params);
        objective += value;
        converged.push(ok);
    }
    Ok(MStep {
        params,
        objective,
        converged,
    })
}

/// Rescale each user's `(α_·u, η_u·)`; the likelihood is unchanged.
pub fn apply_gauge(data: &TrainingData, params: &mut ModelParams, gauge: SpatialGauge) {
    let SpatialGauge::MeanEta(target) = gauge else {
        return;
    };
    let n_cat = data.n_categories;
    for u in 0..data.n_users {
        let mass: f64 = (0..n_cat).map(|c| params.eta(u, c)).sum();
        if !(mass > 0.0) {
            continue;
        }
        let s = target * n_cat as f64 / mass;
        for c in 0..n_cat {
            params.set_eta(u, c, params.eta(u, c) * s);
        }
        for &v in &data.support[u] {
            params.set_alpha(v, u, params.alpha(v, u) * s);
        }
    }
}

/// Random starting point: `μ, β, η ~ U(0.01, 0.1)`, `α = 0.1` on the support.
pub fn initial_params<R: Rng + ?Sized>(data: &TrainingData, rng: &mut R) -> ModelParams {
    let mut p = ModelParams::zeros(data.n_users, data.n_categories);
    let mut draw = || 0.01 + 0.09 * rng.random::<f64>();
    for u in 0..data.n_users {
        for c in 0..data.n_categories {
            p.set_mu(u, c, draw());
        }
    }
    for u in 0..data.n_users {
        p.set_beta(u, draw());
    }
    for u in 0..data.n_users {
        for c in 0..data.n_categories {
            p.set_eta(u, c, draw());
        }
    }
    for u in 0..data.n_users {
        for &v in &data.support[u] {
            p.set_alpha(v, u, 0.1);
        }
    }
    p
}

/// Run EM on precomputed features.
pub fn fit_data(data: &TrainingData, config: &EMConfig, init: Option<&ModelParams>) -> Result<FitResult> {
    config.validate()?;
    if data.n_events() == 0 {
        return Err(Error::invalid("cannot fit an empty training log"));
    }
    let mut params = match init {
        Some(p) => {
            p.validate()?;
            feasible(data, p, config)?
        }
        None => initial_params(data, &mut ChaCha20Rng::seed_from_u64(config.init_seed)),
    };
    apply_gauge(data, &mut params, config.gauge);
    let mut ll = log_likelihood(data, &params)?;
    if !ll.is_finite() {
        // surfaces the offending event
        e_step_data(data, &params)?;
        return Err(Error::Numerical(format!("initial log-likelihood is {ll}")));
    }
    let mut loglik_trace = vec![ll];
    let mut expected_trace = Vec::new();
    let mut iterates = Vec::new();
    let mut user_converged = vec![true; data.n_users];
    let mut converged = false;
    let mut iters = 0;
    while iters < config.max_em_iters {
        iters += 1;
        let resp = e_step_data(data, &params)?;
        let step = m_step(data, &resp, &params, config)?;
        let mut next = step.params;
        apply_gauge(data, &mut next, config.gauge);
        let next_ll = log_likelihood(data, &next)?;
        if !next_ll.is_finite() {
            return Err(Error::Numerical(format!("log-likelihood became {next_ll} at iteration {iters}")));
        }
        params = next;
        loglik_trace.push(next_ll);
        expected_trace.push(step.objective);
        user_converged = step.converged;
        if config.keep_iterates {
            iterates.push(params.clone());
        }
        let gain = next_ll - ll;
        ll = next_ll;
        if gain < config.tol {
            converged = true;
            break;
        }
    }
    Ok(FitResult {
        params,
        hyper: data.hyper,
        loglik_trace,
        expected_trace,
        em_iters_used: iters,
        converged,
        user_converged,
        iterates,
    })
}

/// Fit the model to `log`. `mask` restricts `α_vu` to graph edges `v -> u`.
pub fn fit(
    log: &EventLog,
    hyper: &HyperParams,
    config: &EMConfig,
    init: Option<&ModelParams>,
    mask: Option<&SocialGraph>,
) -> Result<FitResult> {
    if log.is_empty() {
        return Err(Error::invalid("cannot fit an empty training log"));
    }
    let data = TrainingData::new(log, hyper, mask)?;
    fit_data(&data, config, init)
}
