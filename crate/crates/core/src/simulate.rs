//! Sampling check-in streams from the generative model by thinning.
//!
//! The time of the next check-in is drawn from the superposed intensity
//! `λ(t) = Σ_{u,c} λ_u(t, c)`; the user is then chosen in proportion to
//! `λ_u(t)`, the category in proportion to `λ_u(t, c)`, and the location from
//! `f_u(· | c, t)`.
//!
//! The dominating rate over a lookahead window `[t, t + τ/2]` is
//! `μ_uc + β_u Σ_i Σ_k e^{−k} sup h(·)`, the supremum being taken over the
//! part of each period-`k` bump that falls inside the window. Between
//! accepted events the history is fixed, so one bound serves the whole
//! window.

use rand::Rng;

use crate::error::{Error, Result};
use crate::log::EventLog;
use crate::model::{Checkin, HyperParams, KernelMode, LocationLayout, ModelParams};
use crate::spatial::SpatialState;
use crate::temporal::{excitation, kernel};

/// When to stop sampling. At least one limit must be set.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StopRule {
    pub horizon: Option<f64>,
    pub max_events: Option<usize>,
}

impl StopRule {
    pub fn horizon(t: f64) -> Self {
        Self { horizon: Some(t), max_events: None }
    }

    pub fn events(n: usize) -> Self {
        Self { horizon: None, max_events: Some(n) }
    }
}

struct Window {
    end: f64,
    bounds: Vec<f64>,
    total: f64,
}

/// Stateful sampler holding the history generated so far.
#[derive(Clone)]
pub struct Simulator<'a> {
    params: &'a ModelParams,
    hyper: HyperParams,
    layout: LocationLayout,
    history: Vec<Vec<f64>>,
    spatial: SpatialState,
    events: Vec<Checkin>,
    now: f64,
    base_rate: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(params: &'a ModelParams, hyper: HyperParams, layout: LocationLayout) -> Result<Self> {
        hyper.validate()?;
        params.validate()?;
        if params.n_categories() != layout.n_categories() {
            return Err(Error::invalid(format!(
                "parameters have C={} but the layout has {} categories",
                params.n_categories(),
                layout.n_categories()
            )));
        }
        if (0..layout.n_categories()).any(|c| layout.locations_of(c).is_empty()) {
            return Err(Error::invalid("every category needs at least one location"));
        }
        let n = params.n_users();
        Ok(Self {
            params,
            hyper,
            history: vec![Vec::new(); n * layout.n_categories()],
            spatial: SpatialState::new(n, layout.clone(), hyper),
            layout,
            events: Vec::new(),
            now: 0.0,
            base_rate: params.mu_slice().iter().sum(),
        })
    }

    /// Insert pre-existing history (e.g. a seeded event). Events must be no
    /// earlier than anything already recorded.
    pub fn push_history(&mut self, e: Checkin) -> Result<()> {
        if e.t < self.now {
            return Err(Error::invalid("history must be added in time order"));
        }
        if e.user >= self.params.n_users() || e.location >= self.layout.n_locations() {
            return Err(Error::invalid("seeded event ids out of range"));
        }
        if self.layout.category_of(e.location) != e.category {
            return Err(Error::invalid("seeded event location/category mismatch"));
        }
        self.record(e);
        Ok(())
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn events(&self) -> &[Checkin] {
        &self.events
    }

    fn n_categories(&self) -> usize {
        self.layout.n_categories()
    }

    fn record(&mut self, e: Checkin) {
        let idx = e.user * self.n_categories() + e.category;
        self.history[idx].push(e.t);
        self.spatial.observe(&e);
        self.events.push(e);
        self.now = e.t;
    }

    fn reach(&self) -> f64 {
        (self.hyper.max_periods as f64 + 1.0) * self.hyper.tau
    }

    /// Upper bound on the periodic sum of `times` over `[t0, t1]`.
    fn excitation_bound(&self, times: &[f64], t0: f64, t1: f64) -> f64 {
        let h = &self.hyper;
        let (lo, hi) = match h.kernel_mode {
            KernelMode::PaperFloor => (0.0, h.tau / 2.0),
            KernelMode::NearestPeriod => (-h.tau / 2.0, h.tau / 2.0),
        };
        let reach = self.reach();
        let mut bound = 0.0;
        for &ti in times.iter().rev() {
            if t0 - ti > reach {
                break;
            }
            let k_first = ((t0 - ti - hi) / h.tau).floor().max(1.0);
            let k_last = ((t1 - ti - lo) / h.tau).ceil().min(h.max_periods as f64);
            let mut k = k_first;
            while k <= k_last {
                let centre = ti + k * h.tau;
                let x1 = (t0 - centre).max(lo);
                let x2 = (t1 - centre).min(hi);
                if x2 >= x1 {
                    bound += kernel(0.0f64.clamp(x1, x2), h) * (-k).exp();
                }
                k += 1.0;
            }
        }
        bound
    }

    fn window(&self, start: f64, horizon: f64) -> Window {
        let end = (start + self.hyper.tau / 2.0).min(horizon);
        let n_cat = self.n_categories();
        let bounds: Vec<f64> = (0..self.history.len())
            .map(|idx| {
                let (u, c) = (idx / n_cat, idx % n_cat);
                let beta = self.params.beta(u);
                let exc = if beta > 0.0 {
                    self.excitation_bound(&self.history[idx], start, end)
                } else {
                    0.0
                };
                self.params.mu(u, c) + beta * exc
            })
            .collect();
        let total = bounds.iter().sum();
        Window { end, bounds, total }
    }

    fn intensity(&self, idx: usize, t: f64) -> f64 {
        let n_cat = self.n_categories();
        let (u, c) = (idx / n_cat, idx % n_cat);
        let beta = self.params.beta(u);
        let exc = if beta > 0.0 {
            excitation(&self.history[idx], t, &self.hyper)
        } else {
            0.0
        };
        self.params.mu(u, c) + beta * exc
    }

    fn exhausted(&self, t: f64) -> bool {
        self.base_rate == 0.0
            && self
                .events
                .last()
                .is_none_or(|e| t - e.t > self.reach())
    }

    /// Sample the next check-in after the current time, or `None` when the
    /// process passes `horizon` (or can never fire again).
    pub fn next_event<R: Rng + ?Sized>(&mut self, horizon: f64, rng: &mut R) -> Result<Option<Checkin>> {
        let mut t = self.now;
        while t < horizon {
            if self.exhausted(t) {
                return Ok(None);
            }
            let w = self.window(t, horizon);
            if !w.total.is_finite() {
                return Err(Error::Numerical(format!("non-finite intensity bound at t={t}")));
            }
            if w.total <= 0.0 {
                t = w.end;
                continue;
            }
            loop {
                let u01: f64 = rng.random();
                let s = t - (1.0 - u01).ln() / w.total;
                if s >= w.end {
                    t = w.end;
                    break;
                }
                t = s;
                let lambdas: Vec<f64> = (0..self.history.len()).map(|i| self.intensity(i, s)).collect();
                let total: f64 = lambdas.iter().sum();
                if !total.is_finite() {
                    return Err(Error::Numerical(format!("non-finite intensity at t={s}")));
                }
                debug_assert!(
                    lambdas.iter().zip(&w.bounds).all(|(l, b)| *l <= b * (1.0 + 1e-12)),
                    "thinning bound violated"
                );
                if rng.random::<f64>() * w.total >= total {
                    continue;
                }
                let e = self.attribute(s, &lambdas, total, rng)?;
                self.record(e);
                return Ok(Some(e));
            }
        }
        Ok(None)
    }

    fn attribute<R: Rng + ?Sized>(&self, s: f64, lambdas: &[f64], total: f64, rng: &mut R) -> Result<Checkin> {
        let n_cat = self.n_categories();
        let per_user: Vec<f64> = lambdas.chunks(n_cat).map(|ch| ch.iter().sum()).collect();
        let u = pick(&per_user, total, rng);
        let c = pick(&lambdas[u * n_cat..(u + 1) * n_cat], per_user[u], rng);
        let dist = self.spatial.location_distribution(self.params, u, c, s)?;
        let locs = self.layout.locations_of(c);
        let weights: Vec<f64> = locs.iter().map(|&l| dist.probs[l]).collect();
        let l = locs[pick(&weights, weights.iter().sum(), rng)];
        Ok(Checkin::new(s, u, c, l))
    }
}

/// Categorical draw proportional to `weights` (which sum to `total`).
fn pick<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if target < acc {
            return i;
        }
    }
    last_positive
}

/// Simulate a check-in log from scratch.
///
/// In event-count mode the returned horizon is the time at which the next
/// event would have occurred, so the log is a complete observation of
/// `[0, horizon)`.
pub fn simulate<R: Rng + ?Sized>(
    params: &ModelParams,
    hyper: &HyperParams,
    layout: &LocationLayout,
    stop: StopRule,
    rng: &mut R,
) -> Result<EventLog> {
    simulate_from(params, hyper, layout, &[], stop, rng)
}

/// Like [`simulate`], continuing from the given seed history.
pub fn simulate_from<R: Rng + ?Sized>(
    params: &ModelParams,
    hyper: &HyperParams,
    layout: &LocationLayout,
    seeded: &[Checkin],
    stop: StopRule,
    rng: &mut R,
) -> Result<EventLog> {
    if stop.horizon.is_none() && stop.max_events.is_none() {
        return Err(Error::invalid("simulation needs a horizon or an event count"));
    }
    let horizon = stop.horizon.unwrap_or(f64::INFINITY);
    if horizon.is_nan() || horizon < 0.0 {
        return Err(Error::invalid(format!("bad horizon {horizon}")));
    }
    let mut sim = Simulator::new(params, *hyper, layout.clone())?;
    for &e in seeded {
        sim.push_history(e)?;
    }
    let limit = stop.max_events.map(|n| n + seeded.len()).unwrap_or(usize::MAX);
    let mut end = horizon;
    while sim.events().len() < limit {
        if sim.next_event(horizon, rng)?.is_none() {
            break;
        }
    }
    let mut events = sim.events().to_vec();
    if events.len() > limit {
        events.truncate(limit);
    }
    if sim.events().len() >= limit {
        // the draw that would come next closes the observation window
        if let Some(next) = sim.next_event(horizon, rng)? {
            end = next.t;
        }
    }
    if !end.is_finite() {
        end = events.last().map_or(0.0, |e| e.t) + sim.reach();
    }
    EventLog::new(params.n_users(), layout.clone(), events, end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn flat_params(n: usize, c: usize, mu: f64, beta: f64, eta: f64) -> ModelParams {
        ModelParams::from_parts(
            n,
            c,
            vec![mu; n * c],
            vec![beta; n],
            vec![0.0; n * n],
            vec![eta; n * c],
        )
        .unwrap()
    }

    #[test]
    fn zero_rate_ends_immediately() {
        let p = flat_params(2, 1, 0.0, 0.5, 0.1);
        let layout = LocationLayout::uniform(1, 2);
        let mut sim = Simulator::new(&p, HyperParams::default(), layout).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert_eq!(sim.next_event(100.0, &mut rng).unwrap(), None);
        assert_eq!(sim.next_event(f64::INFINITY, &mut rng).unwrap(), None);
    }

    #[test]
    fn zero_horizon_gives_empty_log() {
        let p = flat_params(2, 1, 1.0, 0.0, 0.1);
        let layout = LocationLayout::uniform(1, 2);
        let log = simulate(&p, &HyperParams::default(), &layout, StopRule::horizon(0.0), &mut ChaCha20Rng::seed_from_u64(0))
            .unwrap();
        assert!(log.is_empty());
        assert_eq!(log.horizon(), 0.0);
    }

    #[test]
    fn event_count_mode_stops_at_count() {
        let p = flat_params(3, 2, 0.2, 0.05, 0.1);
        let layout = LocationLayout::uniform(2, 3);
        let log = simulate(&p, &HyperParams::default(), &layout, StopRule::events(200), &mut ChaCha20Rng::seed_from_u64(5))
            .unwrap();
        assert_eq!(log.len(), 200);
        assert!(log.events().last().unwrap().t < log.horizon());
    }

    #[test]
    fn bound_dominates_intensity_on_a_grid() {
        for mode in [KernelMode::PaperFloor, KernelMode::NearestPeriod] {
            let hyper = HyperParams { kernel_mode: mode, ..HyperParams::default() };
            let p = flat_params(1, 1, 0.01, 1.0, 0.1);
            let layout = LocationLayout::uniform(1, 1);
            let mut sim = Simulator::new(&p, hyper, layout).unwrap();
            for t in [0.0, 3.3, 5.9, 11.0, 17.5] {
                sim.push_history(Checkin::new(t, 0, 0, 0)).unwrap();
            }
            let mut start = 17.5;
            while start < 120.0 {
                let w = sim.window(start, f64::INFINITY);
                let mut s = start;
                while s <= w.end {
                    assert!(sim.intensity(0, s) <= w.bounds[0] * (1.0 + 1e-12));
                    s += 0.01;
                }
                start += 1.7;
            }
        }
    }

    #[test]
    fn simulated_locations_stay_in_category() {
        let mut p = flat_params(4, 2, 0.1, 0.05, 0.05);
        for v in 0..4 {
            for u in 0..4 {
                p.set_alpha(v, u, 0.3);
            }
        }
        let layout = LocationLayout::uniform(2, 3);
        let hyper = HyperParams { popularity_prior: 0.1, ..HyperParams::default() };
        let log = simulate(&p, &hyper, &layout, StopRule::horizon(200.0), &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        assert!(!log.is_empty());
        for e in log.events() {
            assert_eq!(layout.category_of(e.location), e.category);
        }
    }
}
