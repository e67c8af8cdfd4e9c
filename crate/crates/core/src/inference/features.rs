//! Parameter-free summaries of a training log.
//!
//! Everything the EM objective needs that does not depend on θ is computed
//! once: the periodic excitation at each event, the compensator of every
//! (user, category) stream, the decayed visit mass of each candidate
//! influencer at the event's location and category, and `G₀` at the event.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::log::EventLog;
use crate::model::{HyperParams, SocialGraph};
use crate::spatial::SpatialState;
use crate::temporal::{excitation, excitation_integral};

/// One training event of a user, with its θ-free features.
#[derive(Debug, Clone, PartialEq)]
pub struct UserEvent {
    /// Position in the training log.
    pub index: usize,
    pub t: f64,
    pub category: usize,
    pub location: usize,
    /// `Σ_j h(t − t_j − k_j τ) e^{−k_j}` over the user's earlier events in the category.
    pub excitation: f64,
    /// `(support slot, Σ_{D_vcl(t)} e^{−ω(t − t_j)})` for influencers that visited the location.
    pub sources: Vec<(usize, f64)>,
    /// `(support slot, Σ_{D_vc·(t)} e^{−ω(t − t_j)})` for influencers active in the category.
    pub exposures: Vec<(usize, f64)>,
    /// `ln S` of each entry of `sources`.
    pub ln_sources: Vec<f64>,
    /// `ln A` of each entry of `exposures`.
    pub ln_exposures: Vec<f64>,
    /// `G₀(l)` at the event time.
    pub g0: f64,
}

/// θ-free view of a training log on `(0, horizon]`.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub n_users: usize,
    pub n_categories: usize,
    pub horizon: f64,
    pub hyper: HyperParams,
    /// `support[u]`: users `v` whose `α_vu` is a free parameter.
    pub support: Vec<Vec<usize>>,
    /// Events of each user in time order.
    pub users: Vec<Vec<UserEvent>>,
    /// `compensator[u * C + c] = Σ_{t_j ∈ D_uc·(T)} ∫_0^T` of the periodic bump train of `t_j`.
    pub compensator: Vec<f64>,
    /// For each log position, `(user, slot in users[user])`.
    pub locate: Vec<(usize, usize)>,
}

impl TrainingData {
    /// `mask` restricts `α_vu` to edges `v -> u` of the graph; without it
    /// every `α_vu` (including `α_uu`) is free.
    pub fn new(log: &EventLog, hyper: &HyperParams, mask: Option<&SocialGraph>) -> Result<Self> {
        hyper.validate()?;
        let n = log.n_users();
        let n_cat = log.n_categories();
        if let Some(g) = mask {
            if g.n() != n {
                return Err(Error::invalid(format!("mask has {} nodes but N={n}", g.n())));
            }
        }
        let support: Vec<Vec<usize>> = (0..n)
            .map(|u| match mask {
                Some(g) => (0..n).filter(|&v| g.has_edge(v, u)).collect(),
                None => (0..n).collect(),
            })
            .collect();
        let events = log.events();
        let mut users: Vec<Vec<UserEvent>> = vec![Vec::new(); n];
        let mut locate = Vec::with_capacity(events.len());
        let mut state = SpatialState::new(n, log.layout().clone(), *hyper);
        let mut start = 0;
        while start < events.len() {
            let t = events[start].t;
            let mut end = start;
            while end < events.len() && events[end].t == t {
                end += 1;
            }
            // simultaneous events do not see one another
            for (index, e) in events.iter().enumerate().take(end).skip(start) {
                let u = e.user;
                let mut sources = Vec::new();
                let mut exposures = Vec::new();
                for (k, &v) in support[u].iter().enumerate() {
                    let s = state.activity_at(v, e.location, t);
                    if s > 0.0 {
                        sources.push((k, s));
                    }
                    let a = state.category_activity_at(v, e.category, t);
                    if a > 0.0 {
                        exposures.push((k, a));
                    }
                }
                locate.push((u, users[u].len()));
                users[u].push(UserEvent {
                    index,
                    t,
                    category: e.category,
                    location: e.location,
                    excitation: 0.0,
                    ln_sources: sources.iter().map(|x| x.1.ln()).collect(),
                    ln_exposures: exposures.iter().map(|x| x.1.ln()).collect(),
                    sources,
                    exposures,
                    g0: state.g0_at(e.location, t),
                });
            }
            for e in &events[start..end] {
                state.observe(e);
            }
            start = end;
        }

        users.par_iter_mut().enumerate().for_each(|(u, evs)| {
            for ev in evs.iter_mut() {
                ev.excitation = excitation(log.user_category_times(u, ev.category), ev.t, hyper);
            }
        });
        let horizon = log.horizon();
        let compensator = (0..n * n_cat)
            .into_par_iter()
            .map(|idx| {
                let (u, c) = (idx / n_cat, idx % n_cat);
                excitation_integral(log.user_category_times(u, c), 0.0, horizon, hyper)
            })
            .collect();

        Ok(Self {
            n_users: n,
            n_categories: n_cat,
            horizon,
            hyper: *hyper,
            support,
            users,
            compensator,
            locate,
        })
    }

    pub fn n_events(&self) -> usize {
        self.locate.len()
    }

    pub fn compensator(&self, u: usize, c: usize) -> f64 {
        self.compensator[u * self.n_categories + c]
    }
}
