//! Location model: a time-varying multinomial mixing exploitation of
//! locations recently visited by influencers with exploration from the
//! popularity distribution `G₀`.
//!
//! ```text
//! w^v_ucl = α_vu Σ_{t_i ∈ D_vcl(t)} exp(−ω(t − t_i))      w_ucl = Σ_v w^v_ucl
//! m_cl    =      Σ_{t_i ∈ D_·cl(t)} exp(−ω(t − t_i))
//! f_u(l | c, t) = w_ucl / (η_uc + w_uc·) + η_uc / (η_uc + w_uc·) · G₀(l)
//! G₀(l)   = (m_cl + ρ) / (m_c· + ρ L_c)
//! ```
//!
//! With `ρ = 0` and no history in the category, `G₀` is uniform over the
//! category's locations.

use crate::error::{Error, Result};
use crate::log::EventLog;
use crate::model::{Checkin, HyperParams, LocationLayout, ModelParams};

/// Latent source of a check-in location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    /// Drawn from the popularity distribution `G₀`.
    Exploration,
    /// Copied from the recent history of this user.
    User(usize),
}

/// Exponentially decaying sum `Σ exp(−ω(t − t_i))`, stored as its value at
/// the time of the last update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Decaying {
    value: f64,
    stamp: f64,
}

impl Decaying {
    fn at(&self, t: f64, rate: f64) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.value * (-rate * (t - self.stamp)).exp()
        }
    }

    fn add(&mut self, t: f64, rate: f64) {
        self.value = self.at(t, rate) + 1.0;
        self.stamp = t;
    }
}

fn g0_value(m_l: f64, m_total: f64, n_locations: usize, prior: f64) -> f64 {
    let denom = m_total + prior * n_locations as f64;
    if denom > 0.0 {
        (m_l + prior) / denom
    } else {
        1.0 / n_locations as f64
    }
}

/// Snapshot of the decayed activity sums at `eval_time`.
///
/// `α`-weighted quantities are formed on demand from a [`ModelParams`], so
/// one snapshot serves any parameter value.
#[derive(Debug, Clone)]
pub struct SpatialWeights {
    eval_time: f64,
    n_users: usize,
    layout: LocationLayout,
    /// `activity[v * L + l] = Σ_{t_i ∈ D_vcl(t)} exp(−ω(t − t_i))`
    activity: Vec<f64>,
    /// `popularity[l] = m_cl`
    popularity: Vec<f64>,
    popularity_prior: f64,
}

impl SpatialWeights {
    pub fn eval_time(&self) -> f64 {
        self.eval_time
    }

    pub fn layout(&self) -> &LocationLayout {
        &self.layout
    }

    /// Decayed visit mass of `v` at location `l`.
    pub fn activity(&self, v: usize, l: usize) -> f64 {
        self.activity[v * self.layout.n_locations() + l]
    }

    /// `w^v_ucl`
    pub fn w_source(&self, params: &ModelParams, u: usize, l: usize, v: usize) -> f64 {
        params.alpha(v, u) * self.activity(v, l)
    }

    /// `w_ucl`
    pub fn w(&self, params: &ModelParams, u: usize, l: usize) -> f64 {
        (0..self.n_users).map(|v| self.w_source(params, u, l, v)).sum()
    }

    /// `w_uc·`
    pub fn w_total(&self, params: &ModelParams, u: usize, c: usize) -> f64 {
        self.layout
            .locations_of(c)
            .iter()
            .map(|&l| self.w(params, u, l))
            .sum()
    }

    /// `m_cl`
    pub fn m(&self, l: usize) -> f64 {
        self.popularity[l]
    }

    /// `m_c·`
    pub fn m_total(&self, c: usize) -> f64 {
        self.layout.locations_of(c).iter().map(|&l| self.popularity[l]).sum()
    }

    /// `G₀(l)` within the category of `l`.
    pub fn g0(&self, l: usize) -> f64 {
        let c = self.layout.category_of(l);
        g0_value(
            self.popularity[l],
            self.m_total(c),
            self.layout.locations_of(c).len(),
            self.popularity_prior,
        )
    }

    fn check(&self, params: &ModelParams, u: usize, c: usize) -> Result<()> {
        if params.n_users() != self.n_users || params.n_categories() != self.layout.n_categories() {
            return Err(Error::invalid("parameter dimensions do not match the weights"));
        }
        if u >= self.n_users || c >= self.layout.n_categories() {
            return Err(Error::invalid(format!("(user {u}, category {c}) out of range")));
        }
        Ok(())
    }
}

/// Decayed activity sums at time `t` from the events of `log` strictly before `t`.
pub fn compute_weights(log: &EventLog, hyper: &HyperParams, t: f64) -> Result<SpatialWeights> {
    hyper.validate()?;
    let mut state = SpatialState::new(log.n_users(), log.layout().clone(), *hyper);
    let end = log.events().partition_point(|e| e.t < t);
    for e in &log.events()[..end] {
        state.observe(e);
    }
    Ok(state.weights_at(t))
}

/// Incrementally maintained activity sums: each entry decays exactly by
/// `exp(−ωΔ)` between updates, so observing an event is O(1).
#[derive(Debug, Clone)]
pub struct SpatialState {
    n_users: usize,
    layout: LocationLayout,
    hyper: HyperParams,
    activity: Vec<Decaying>,
    category_activity: Vec<Decaying>,
    popularity: Vec<Decaying>,
    category_popularity: Vec<Decaying>,
    last_time: f64,
}

impl SpatialState {
    pub fn new(n_users: usize, layout: LocationLayout, hyper: HyperParams) -> Self {
        let n_loc = layout.n_locations();
        let n_cat = layout.n_categories();
        Self {
            n_users,
            layout,
            hyper,
            activity: vec![Decaying::default(); n_users * n_loc],
            category_activity: vec![Decaying::default(); n_users * n_cat],
            popularity: vec![Decaying::default(); n_loc],
            category_popularity: vec![Decaying::default(); n_cat],
            last_time: f64::NEG_INFINITY,
        }
    }

    /// Add an event; events must arrive in non-decreasing time order.
    pub fn observe(&mut self, e: &Checkin) {
        debug_assert!(e.t >= self.last_time, "events must be observed in time order");
        let rate = self.hyper.spatial_decay;
        let n_loc = self.layout.n_locations();
        let n_cat = self.layout.n_categories();
        self.activity[e.user * n_loc + e.location].add(e.t, rate);
        self.category_activity[e.user * n_cat + e.category].add(e.t, rate);
        self.popularity[e.location].add(e.t, rate);
        self.category_popularity[e.category].add(e.t, rate);
        self.last_time = e.t;
    }

    pub fn activity_at(&self, v: usize, l: usize, t: f64) -> f64 {
        self.activity[v * self.layout.n_locations() + l].at(t, self.hyper.spatial_decay)
    }

    /// `Σ_{l ∈ c}` of [`activity_at`](Self::activity_at).
    pub fn category_activity_at(&self, v: usize, c: usize, t: f64) -> f64 {
        self.category_activity[v * self.layout.n_categories() + c].at(t, self.hyper.spatial_decay)
    }

    pub fn g0_at(&self, l: usize, t: f64) -> f64 {
        let c = self.layout.category_of(l);
        let rate = self.hyper.spatial_decay;
        g0_value(
            self.popularity[l].at(t, rate),
            self.category_popularity[c].at(t, rate),
            self.layout.locations_of(c).len(),
            self.hyper.popularity_prior,
        )
    }

    /// Dense snapshot at `t` (no later than any future observation).
    pub fn weights_at(&self, t: f64) -> SpatialWeights {
        let rate = self.hyper.spatial_decay;
        SpatialWeights {
            eval_time: t,
            n_users: self.n_users,
            layout: self.layout.clone(),
            activity: self.activity.iter().map(|d| d.at(t, rate)).collect(),
            popularity: self.popularity.iter().map(|d| d.at(t, rate)).collect(),
            popularity_prior: self.hyper.popularity_prior,
        }
    }

    /// Location distribution of `u` in category `c` at `t`, touching only
    /// the category's locations.
    pub fn location_distribution(
        &self,
        params: &ModelParams,
        u: usize,
        c: usize,
        t: f64,
    ) -> Result<LocationDistribution> {
        let locs = self.layout.locations_of(c);
        let w: Vec<f64> = locs
            .iter()
            .map(|&l| {
                (0..self.n_users)
                    .map(|v| params.alpha(v, u) * self.activity_at(v, l, t))
                    .sum()
            })
            .collect();
        let g0: Vec<f64> = locs.iter().map(|&l| self.g0_at(l, t)).collect();
        assemble(self.layout.n_locations(), locs, &w, &g0, params.eta(u, c), u, c)
    }
}

/// `f_u(· | c, t)` over all `L` locations (zero outside category `c`).
#[derive(Debug, Clone, PartialEq)]
pub struct LocationDistribution {
    pub category: usize,
    pub probs: Vec<f64>,
    /// `η_uc / (η_uc + w_uc·)`
    pub explore_mass: f64,
}

fn assemble(
    n_locations: usize,
    locs: &[usize],
    w: &[f64],
    g0: &[f64],
    eta: f64,
    u: usize,
    c: usize,
) -> Result<LocationDistribution> {
    let w_total: f64 = w.iter().sum();
    let denom = eta + w_total;
    if !(denom > 0.0) {
        return Err(Error::DegenerateDistribution { user: u, category: c });
    }
    let explore_mass = eta / denom;
    let mut probs = vec![0.0; n_locations];
    for (i, &l) in locs.iter().enumerate() {
        probs[l] = w[i] / denom + explore_mass * g0[i];
    }
    Ok(LocationDistribution {
        category: c,
        probs,
        explore_mass,
    })
}

pub fn location_distribution(
    weights: &SpatialWeights,
    params: &ModelParams,
    u: usize,
    c: usize,
) -> Result<LocationDistribution> {
    weights.check(params, u, c)?;
    let locs = weights.layout.locations_of(c);
    let w: Vec<f64> = locs.iter().map(|&l| weights.w(params, u, l)).collect();
    let g0: Vec<f64> = locs.iter().map(|&l| weights.g0(l)).collect();
    assemble(weights.layout.n_locations(), locs, &w, &g0, params.eta(u, c), u, c)
}

/// `γ^v_ucl`: the share of `f_u(l | c, t)` attributable to `source`.
pub fn gamma(
    weights: &SpatialWeights,
    params: &ModelParams,
    u: usize,
    c: usize,
    l: usize,
    source: Source,
) -> Result<f64> {
    weights.check(params, u, c)?;
    if l >= weights.layout.n_locations() {
        return Err(Error::invalid(format!("location {l} out of range")));
    }
    if weights.layout.category_of(l) != c {
        return Ok(0.0);
    }
    let eta = params.eta(u, c);
    let denom = eta + weights.w_total(params, u, c);
    if !(denom > 0.0) {
        return Err(Error::DegenerateDistribution { user: u, category: c });
    }
    Ok(match source {
        Source::Exploration => eta * weights.g0(l) / denom,
        Source::User(v) => {
            if v >= weights.n_users {
                return Err(Error::invalid(format!("influencer {v} out of range")));
            }
            weights.w_source(params, u, l, v) / denom
        }
    })
}
