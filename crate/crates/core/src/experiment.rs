//! Synthetic protocol: Kronecker graph, uniform ground truth, simulated log,
//! fits on growing train prefixes, and comparisons against baselines.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_hawkes, fit_multihawkes, most_popular_rank, periodic_loc_rank, Periodic};
use crate::error::{Error, Result};
use crate::graphs::{kronecker_graph, sample_ground_truth, KroneckerSeed, ParamRanges};
use crate::inference::{fit, EMConfig, FitResult};
use crate::log::EventLog;
use crate::metrics::{
    accuracy_at_k, aligned_mse_blocks, avg_pred_loglik, avg_pred_loglik_temporal, edge_auc, interevent_histogram, ndcg_at_k, param_mse_blocks, sociality,
    FriendDirection, Histogram, MseBreakdown, NdcgMode,
};
use crate::model::{HyperParams, LocationLayout, ModelParams, SocialGraph};
use crate::predict::rank_locations;
use crate::simulate::{simulate, StopRule};
use crate::spatial::SpatialState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// Named Kronecker structure, e.g. `core-periphery`.
    pub structure: String,
    /// Kronecker power: `N = 2^power`.
    pub power: u32,
    pub n_categories: usize,
    pub locations_per_category: usize,
    pub ranges: ParamRanges,
    pub hyper: HyperParams,
    pub n_events: usize,
    /// Leading share of the log used for training; the rest is the test set.
    pub train_split: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            structure: "core-periphery".into(),
            power: 4,
            n_categories: 2,
            locations_per_category: 4,
            ranges: ParamRanges::default(),
            hyper: HyperParams {
                popularity_prior: 1.0,
                ..HyperParams::default()
            },
            n_events: 4000,
            train_split: 0.8,
            seed: 1,
        }
    }
}

/// One generated synthetic data set.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: SocialGraph,
    pub truth: ModelParams,
    pub hyper: HyperParams,
    pub log: EventLog,
    pub train_split: f64,
}

impl Instance {
    /// Fixed train and test parts of the log.
    pub fn split(&self) -> Result<(EventLog, EventLog)> {
        self.log.split(self.train_split)
    }

    /// The first `fraction` of the training part.
    pub fn train_prefix(&self, fraction: f64) -> Result<EventLog> {
        train_prefix(&self.split()?.0, fraction)
    }

    /// Time of the first test event.
    pub fn test_start(&self) -> Result<f64> {
        Ok(self.split()?.0.horizon())
    }
}

/// Graph, then ground truth, then events, all from one seeded stream.
pub fn generate(cfg: &SyntheticConfig) -> Result<Instance> {
    let seed = KroneckerSeed::named(&cfg.structure, cfg.power)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let graph = kronecker_graph(&seed, &mut rng);
    let truth = sample_ground_truth(&graph, cfg.n_categories, &cfg.ranges, &mut rng)?;
    let layout = LocationLayout::uniform(cfg.n_categories, cfg.locations_per_category);
    let log = simulate(&truth, &cfg.hyper, &layout, StopRule::events(cfg.n_events), &mut rng)?;
    Ok(Instance {
        graph,
        truth,
        hyper: cfg.hyper,
        log,
        train_split: cfg.train_split,
    })
}

/// The first `fraction` of `log` (all of it at 1).
pub fn train_prefix(log: &EventLog, fraction: f64) -> Result<EventLog> {
    if fraction >= 1.0 {
        Ok(log.clone())
    } else {
        Ok(log.split(fraction)?.0)
    }
}

/// `α` support used for fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSupport {
    /// Every ordered pair, self pairs included.
    #[default]
    Dense,
    /// Edges of the true graph.
    Graph,
}

impl AlphaSupport {
    fn mask<'a>(&self, inst: &'a Instance) -> Option<&'a SocialGraph> {
        match self {
            AlphaSupport::Dense => None,
            AlphaSupport::Graph => Some(&inst.graph),
        }
    }
}

/// Result of fitting one train prefix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryPoint {
    pub fraction: f64,
    pub n_train: usize,
    pub mse: MseBreakdown,
    /// Error after removing the unidentifiable per-user spatial scale.
    pub mse_aligned: MseBreakdown,
    pub auc: f64,
    /// Held-out log-likelihood per test event, times and locations.
    pub test_loglik: f64,
    pub em_iters: usize,
    pub final_loglik: f64,
    pub monotone: bool,
}

/// Non-decreasing within `slack`.
pub fn is_monotone(trace: &[f64], slack: f64) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] - slack)
}

pub fn fit_prefix(
    inst: &Instance,
    fraction: f64,
    config: &EMConfig,
    support: AlphaSupport,
) -> Result<(FitResult, RecoveryPoint)> {
    let train = inst.train_prefix(fraction)?;
    let result = fit(&train, &inst.hyper, config, None, support.mask(inst))?;
    let point = RecoveryPoint {
        fraction,
        n_train: train.len(),
        mse: param_mse_blocks(&result.params, &inst.truth)?,
        mse_aligned: aligned_mse_blocks(&result.params, &inst.truth)?,
        auc: edge_auc(result.params.alpha_slice(), &inst.graph)?,
        test_loglik: avg_pred_loglik(&result.params, &inst.hyper, &inst.log, inst.test_start()?)?,
        em_iters: result.em_iters_used,
        final_loglik: *result.loglik_trace.last().expect("trace starts with the initial point"),
        monotone: is_monotone(&result.loglik_trace, 1e-8),
    };
    Ok((result, point))
}

pub fn recovery_curve(
    inst: &Instance,
    fractions: &[f64],
    config: &EMConfig,
    support: AlphaSupport,
) -> Result<Vec<RecoveryPoint>> {
    fractions
        .iter()
        .map(|&f| fit_prefix(inst, f, config, support).map(|r| r.1))
        .collect()
}

/// Parameter error after one EM iteration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterationError {
    pub iteration: usize,
    pub mse: MseBreakdown,
    pub mse_aligned: MseBreakdown,
}

/// Parameter error after each EM iteration, with the fit itself.
pub fn mse_by_iteration(
    inst: &Instance,
    fraction: f64,
    config: &EMConfig,
    support: AlphaSupport,
) -> Result<(FitResult, Vec<IterationError>)> {
    let cfg = EMConfig {
        keep_iterates: true,
        ..*config
    };
    let train = inst.train_prefix(fraction)?;
    let result = fit(&train, &inst.hyper, &cfg, None, support.mask(inst))?;
    let errors = result
        .iterates
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Ok(IterationError {
                iteration: i + 1,
                mse: param_mse_blocks(p, &inst.truth)?,
                mse_aligned: aligned_mse_blocks(p, &inst.truth)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((result, errors))
}

/// Held-out scores of the model and the baselines on one split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub n_test: usize,
    /// Temporal held-out log-likelihood per test event.
    pub loglik_proposed: f64,
    /// The same with the location term added.
    pub loglik_proposed_full: f64,
    pub loglik_hawkes: f64,
    pub loglik_multihawkes: f64,
    pub ks: Vec<usize>,
    /// `accuracy[model][j]` at `ks[j]`; models in [`Comparison::MODELS`] order.
    pub accuracy: Vec<Vec<f64>>,
    pub ndcg: Vec<Vec<f64>>,
}

impl Comparison {
    pub const MODELS: [&'static str; 3] = ["proposed", "most_popular", "periodic_loc"];
}

/// Per test event, rankings of its category's locations by each model.
pub fn test_rankings(
    params: &ModelParams,
    hyper: &HyperParams,
    log: &EventLog,
    test_start: f64,
    periodic_window: f64,
) -> Result<(Vec<[Vec<usize>; 3]>, Vec<usize>)> {
    let events = log.events();
    let mut state = SpatialState::new(log.n_users(), log.layout().clone(), *hyper);
    let mut rankings = Vec::new();
    let mut truths = Vec::new();
    let ids = |r: Vec<(usize, f64)>| r.into_iter().map(|x| x.0).collect::<Vec<_>>();
    let mut start = 0;
    while start < events.len() {
        let t = events[start].t;
        let end = start + events[start..].iter().take_while(|e| e.t == t).count();
        if t >= test_start {
            let weights = state.weights_at(t);
            for e in &events[start..end] {
                let proposed = rank_locations(&weights, params, e.user, e.category)?;
                let popular = most_popular_rank(log, e.category, t)?;
                let periodic = periodic_loc_rank(log, e.user, e.category, t, hyper.tau, periodic_window)?;
                rankings.push([ids(proposed), ids(popular), ids(periodic)]);
                truths.push(e.location);
            }
        }
        for e in &events[start..end] {
            state.observe(e);
        }
        start = end;
    }
    Ok((rankings, truths))
}

pub fn compare(
    inst: &Instance,
    config: &EMConfig,
    support: AlphaSupport,
    ks: &[usize],
) -> Result<Comparison> {
    let (train, test) = inst.split()?;
    let test_start = train.horizon();
    let fitted = fit(&train, &inst.hyper, config, None, support.mask(inst))?;
    let hawkes = fit_hawkes(&train, &config.optim)?;
    let multi = fit_multihawkes(&train, &inst.graph, &config.optim)?;
    let full = &inst.log;
    let proposed = Periodic {
        params: &fitted.params,
        hyper: &inst.hyper,
    };
    let loglik_proposed = avg_pred_loglik_temporal(&proposed, full, test_start)?;
    let loglik_proposed_full = avg_pred_loglik(&fitted.params, &inst.hyper, full, test_start)?;
    let loglik_hawkes = avg_pred_loglik_temporal(&hawkes, full, test_start)?;
    let loglik_multihawkes = avg_pred_loglik_temporal(&multi, full, test_start)?;

    let (rankings, truths) = test_rankings(&fitted.params, &inst.hyper, full, test_start, 2.0 * inst.hyper.sigma)?;
    let mut accuracy = vec![Vec::new(); 3];
    let mut ndcg = vec![Vec::new(); 3];
    for m in 0..3 {
        let r: Vec<Vec<usize>> = rankings.iter().map(|x| x[m].clone()).collect();
        for &k in ks {
            accuracy[m].push(accuracy_at_k(&r, &truths, k)?);
            ndcg[m].push(ndcg_at_k(&r, &truths, k, NdcgMode::Corrected)?);
        }
    }
    Ok(Comparison {
        n_test: test.len(),
        loglik_proposed,
        loglik_proposed_full,
        loglik_hawkes,
        loglik_multihawkes,
        ks: ks.to_vec(),
        accuracy,
        ndcg,
    })
}

/// Mean sociality of users when `α` is drawn with mean `ratio` times the
/// mean of `η`.
pub fn sociality_for_ratio(base: &SyntheticConfig, ratio: f64, window: Option<f64>) -> Result<(f64, Vec<f64>)> {
    if !(ratio > 0.0) {
        return Err(Error::invalid("ratio must be positive"));
    }
    let eta_mean = 0.5 * (base.ranges.eta.0 + base.ranges.eta.1);
    let mut cfg = base.clone();
    cfg.ranges.alpha = (0.0, 2.0 * ratio * eta_mean);
    let inst = generate(&cfg)?;
    let per_user: Vec<f64> = sociality(&inst.log, &inst.graph, window, FriendDirection::In)?
        .into_iter()
        .flatten()
        .collect();
    if per_user.is_empty() {
        return Err(Error::invalid("no user has check-ins"));
    }
    let mean = per_user.iter().sum::<f64>() / per_user.len() as f64;
    Ok((mean, per_user))
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Interevent histogram of a simulation where every user has `β = beta`.
pub fn interevent_for_beta(base: &SyntheticConfig, beta: f64, bin_width: f64) -> Result<Histogram> {
    let mut cfg = base.clone();
    cfg.ranges.beta = (beta, beta);
    let inst = generate(&cfg)?;
    interevent_histogram(&inst.log, None, None, bin_width)
}
