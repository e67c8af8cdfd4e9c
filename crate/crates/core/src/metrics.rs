//! Evaluation measures for parameter recovery, held-out likelihood, edge
//! recovery, location ranking and behavioural summaries.

use serde::{Deserialize, Serialize};

use crate::baselines::TemporalIntensity;
use crate::error::{Error, Result};
use crate::log::EventLog;
use crate::model::{HyperParams, ModelParams, SocialGraph};
use crate::spatial::SpatialState;

fn mse(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Mean squared error per parameter block and over all entries jointly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseBreakdown {
    pub joint: f64,
    pub mu: f64,
    pub beta: f64,
    pub alpha: f64,
    pub eta: f64,
    /// `μ` and `β` together.
    pub temporal: f64,
}

pub fn param_mse_blocks(est: &ModelParams, truth: &ModelParams) -> Result<MseBreakdown> {
    truth.check_dims(est.n_users(), est.n_categories())?;
    let blocks = [
        (est.mu_slice(), truth.mu_slice()),
        (est.beta_slice(), truth.beta_slice()),
        (est.alpha_slice(), truth.alpha_slice()),
        (est.eta_slice(), truth.eta_slice()),
    ];
    let sse = |(a, b): (&[f64], &[f64])| mse(a, b) * a.len() as f64;
    let total: f64 = blocks.iter().map(|&b| sse(b)).sum();
    let count: usize = blocks.iter().map(|b| b.0.len()).sum();
    let n_temporal = blocks[0].0.len() + blocks[1].0.len();
    Ok(MseBreakdown {
        joint: total / count as f64,
        mu: mse(blocks[0].0, blocks[0].1),
        beta: mse(blocks[1].0, blocks[1].1),
        alpha: mse(blocks[2].0, blocks[2].1),
        eta: mse(blocks[3].0, blocks[3].1),
        temporal: (sse(blocks[0]) + sse(blocks[1])) / n_temporal as f64,
    })
}

/// Mean of squared differences over `μ, β, α, η` concatenated.
pub fn param_mse(est: &ModelParams, truth: &ModelParams) -> Result<f64> {
    Ok(param_mse_blocks(est, truth)?.joint)
}

/// Rescale each user's `(α_·u, η_u·)` by the least-squares factor towards
/// `truth`. The location likelihood is blind to this factor, so errors in it
/// are not estimation errors.
pub fn align_spatial_scale(est: &ModelParams, truth: &ModelParams) -> Result<ModelParams> {
    truth.check_dims(est.n_users(), est.n_categories())?;
    let (n, n_cat) = (est.n_users(), est.n_categories());
    let mut out = est.clone();
    for u in 0..n {
        let mut dot = 0.0;
        let mut norm = 0.0;
        for v in 0..n {
            dot += est.alpha(v, u) * truth.alpha(v, u);
            norm += est.alpha(v, u) * est.alpha(v, u);
        }
        for c in 0..n_cat {
            dot += est.eta(u, c) * truth.eta(u, c);
            norm += est.eta(u, c) * est.eta(u, c);
        }
        if !(dot > 0.0 && norm > 0.0) {
            continue;
        }
        let s = dot / norm;
        for v in 0..n {
            out.set_alpha(v, u, s * est.alpha(v, u));
        }
        for c in 0..n_cat {
            out.set_eta(u, c, s * est.eta(u, c));
        }
    }
    Ok(out)
}

/// [`param_mse_blocks`] after [`align_spatial_scale`].
pub fn aligned_mse_blocks(est: &ModelParams, truth: &ModelParams) -> Result<MseBreakdown> {
    param_mse_blocks(&align_spatial_scale(est, truth)?, truth)
}

fn test_range(log: &EventLog, test_start: f64) -> Result<std::ops::Range<usize>> {
    if !(test_start <= log.horizon()) {
        return Err(Error::invalid(format!(
            "test start {test_start} is after the horizon {}",
            log.horizon()
        )));
    }
    let first = log.events().partition_point(|e| e.t < test_start);
    if first == log.len() {
        return Err(Error::invalid("no test events: the average is undefined"));
    }
    Ok(first..log.len())
}

/// Temporal log-likelihood of the events in `[test_start, T]` per event,
/// with everything before each event as history.
pub fn avg_pred_loglik_temporal(
    model: &(impl TemporalIntensity + ?Sized),
    log: &EventLog,
    test_start: f64,
) -> Result<f64> {
    let range = test_range(log, test_start)?;
    let n = range.len();
    let mut ll = 0.0;
    for e in &log.events()[range] {
        ll += model.intensity(log, e.user, e.category, e.t).ln();
    }
    for u in 0..log.n_users() {
        for c in 0..log.n_categories() {
            ll -= model.integral(log, u, c, test_start, log.horizon());
        }
    }
    Ok(ll / n as f64)
}

/// Per-event log probability of each test location under `f_u(l | c, t)`.
pub fn location_logliks(
    params: &ModelParams,
    hyper: &HyperParams,
    log: &EventLog,
    test_start: f64,
) -> Result<Vec<f64>> {
    params.check_dims(log.n_users(), log.n_categories())?;
    let range = test_range(log, test_start)?;
    let events = log.events();
    let mut state = SpatialState::new(log.n_users(), log.layout().clone(), *hyper);
    let mut out = Vec::with_capacity(range.len());
    let mut start = 0;
    while start < events.len() {
        let t = events[start].t;
        let end = start + events[start..].iter().take_while(|e| e.t == t).count();
        for (i, e) in events.iter().enumerate().take(end).skip(start) {
            if i >= range.start {
                let dist = state.location_distribution(params, e.user, e.category, t)?;
                out.push(dist.probs[e.location].ln());
            }
        }
        for e in &events[start..end] {
            state.observe(e);
        }
        start = end;
    }
    Ok(out)
}

/// Full held-out log-likelihood (times and locations) per test event.
pub fn avg_pred_loglik(
    params: &ModelParams,
    hyper: &HyperParams,
    log: &EventLog,
    test_start: f64,
) -> Result<f64> {
    let model = crate::baselines::Periodic { params, hyper };
    let temporal = avg_pred_loglik_temporal(&model, log, test_start)?;
    let spatial = location_logliks(params, hyper, log, test_start)?;
    Ok(temporal + spatial.iter().sum::<f64>() / spatial.len() as f64)
}

/// Area under the ROC curve of `scores` (row-major `scores[v * n + u]`
/// for the pair `v -> u`) against the graph's edges, self pairs excluded.
/// Tied scores count one half.
pub fn edge_auc(scores: &[f64], truth: &SocialGraph) -> Result<f64> {
    let n = truth.n();
    if scores.len() != n * n {
        return Err(Error::invalid(format!("expected {} scores, got {}", n * n, scores.len())));
    }
    let mut items: Vec<(f64, bool)> = Vec::with_capacity(n * n);
    for v in 0..n {
        for u in 0..n {
            if u != v {
                items.push((scores[v * n + u], truth.has_edge(v, u)));
            }
        }
    }
    if items.iter().any(|x| x.0.is_nan()) {
        return Err(Error::invalid("NaN edge score"));
    }
    let n_pos = items.iter().filter(|x| x.1).count();
    let n_neg = items.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both edges and non-edges"));
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Mann-Whitney with mid-ranks for ties
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < items.len() {
        let mut j = i;
        while j < items.len() && items[j].0 == items[i].0 {
            j += 1;
        }
        let mid_rank = (i + j + 1) as f64 / 2.0;
        rank_sum += mid_rank * items[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    let p = n_pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n_neg as f64))
}

/// One-based position of `truth` in `ranking`.
pub fn rank_of(ranking: &[usize], truth: usize) -> Option<usize> {
    ranking.iter().position(|&l| l == truth).map(|i| i + 1)
}

fn ranks(rankings: &[Vec<usize>], truths: &[usize]) -> Result<Vec<Option<usize>>> {
    if rankings.len() != truths.len() {
        return Err(Error::invalid("rankings and truths differ in length"));
    }
    if rankings.is_empty() {
        return Err(Error::invalid("no events to score"));
    }
    Ok(rankings.iter().zip(truths).map(|(r, &t)| rank_of(r, t)).collect())
}

/// Fraction of events whose true location is among the first `k`.
pub fn accuracy_at_k(rankings: &[Vec<usize>], truths: &[usize], k: usize) -> Result<f64> {
    let r = ranks(rankings, truths)?;
    let hits = r.iter().filter(|x| x.is_some_and(|r| r <= k)).count();
    Ok(hits as f64 / r.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NdcgMode {
    /// `1{r ≤ k} / log₂(1 + r)`
    #[default]
    Corrected,
    /// `1{1 + r < k} / log₂(r)`, infinite at `r = 1` when `k > 2`.
    Literal,
}

pub fn ndcg_at_k(rankings: &[Vec<usize>], truths: &[usize], k: usize, mode: NdcgMode) -> Result<f64> {
    let r = ranks(rankings, truths)?;
    let total: f64 = r
        .iter()
        .map(|x| match (x, mode) {
            (Some(r), NdcgMode::Corrected) if *r <= k => 1.0 / (1.0 + *r as f64).log2(),
            (Some(r), NdcgMode::Literal) if 1 + *r < k => 1.0 / (*r as f64).log2(),
            _ => 0.0,
        })
        .sum();
    Ok(total / r.len() as f64)
}

/// Whose history counts as "friends" for sociality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FriendDirection {
    /// Users `v` with an edge `v -> u` (influencers of `u`).
    #[default]
    In,
    /// Users `v` with an edge `u -> v`.
    Out,
}

/// Per user, the fraction of its check-ins at a location that it or one of
/// its friends visited earlier (within `window` hours, if given). `None`
/// for users without check-ins.
pub fn sociality(
    log: &EventLog,
    graph: &SocialGraph,
    window: Option<f64>,
    direction: FriendDirection,
) -> Result<Vec<Option<f64>>> {
    let n = log.n_users();
    if graph.n() != n {
        return Err(Error::invalid("graph size does not match the log"));
    }
    if window.is_some_and(|w| !(w >= 0.0)) {
        return Err(Error::invalid("sociality window must be nonnegative"));
    }
    let n_loc = log.n_locations();
    let circles: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            let mut s = match direction {
                FriendDirection::In => graph.in_neighbors(u),
                FriendDirection::Out => graph.out_neighbors(u),
            };
            s.push(u);
            s
        })
        .collect();
    let mut last_visit = vec![f64::NEG_INFINITY; n * n_loc];
    let mut social = vec![0usize; n];
    let mut total = vec![0usize; n];
    let events = log.events();
    let mut start = 0;
    while start < events.len() {
        let t = events[start].t;
        let end = start + events[start..].iter().take_while(|e| e.t == t).count();
        for e in &events[start..end] {
            total[e.user] += 1;
            let hit = circles[e.user].iter().any(|&v| {
                let last = last_visit[v * n_loc + e.location];
                last > f64::NEG_INFINITY && window.is_none_or(|w| t - last <= w)
            });
            if hit {
                social[e.user] += 1;
            }
        }
        for e in &events[start..end] {
            last_visit[e.user * n_loc + e.location] = t;
        }
        start = end;
    }
    Ok((0..n)
        .map(|u| (total[u] > 0).then(|| social[u] as f64 / total[u] as f64))
        .collect())
}

/// Counts of gaps between successive events of one stream, in bins
/// `[i·w, (i+1)·w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the fullest bin (the first one on ties).
    pub fn mode_bin(&self) -> Option<usize> {
        let max = *self.counts.iter().max()?;
        if max == 0 {
            return None;
        }
        self.counts.iter().position(|&c| c == max)
    }

    pub fn bin_start(&self, i: usize) -> f64 {
        i as f64 * self.bin_width
    }
}

/// Interevent times within each (user, category) stream, optionally
/// restricted to one user and/or category.
pub fn interevent_histogram(
    log: &EventLog,
    user: Option<usize>,
    category: Option<usize>,
    bin_width: f64,
) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::invalid("bin width must be positive"));
    }
    if user.is_some_and(|u| u >= log.n_users()) || category.is_some_and(|c| c >= log.n_categories()) {
        return Err(Error::invalid("user or category out of range"));
    }
    let users: Vec<usize> = user.map_or_else(|| (0..log.n_users()).collect(), |u| vec![u]);
    let cats: Vec<usize> = category.map_or_else(|| (0..log.n_categories()).collect(), |c| vec![c]);
    let mut counts: Vec<u64> = Vec::new();
    for &u in &users {
        for &c in &cats {
            for w in log.user_category_times(u, c).windows(2) {
                let bin = ((w[1] - w[0]) / bin_width).floor() as usize;
                if bin >= counts.len() {
                    counts.resize(bin + 1, 0);
                }
                counts[bin] += 1;
            }
        }
    }
    Ok(Histogram { bin_width, counts })
}

/// Fraction of absolute time errors at or below each threshold.
pub fn time_threshold_curve(errors: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    if errors.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    Ok(thresholds
        .iter()
        .map(|&th| errors.iter().filter(|e| e.abs() <= th).count() as f64 / errors.len() as f64)
        .collect())
}
