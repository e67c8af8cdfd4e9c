//! Domain types shared by every part of the model.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single check-in: user `user` visited `location` (of `category`) at time `t`.
///
/// Times are in hours throughout; every rate parameter is per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkin {
    pub t: f64,
    pub user: usize,
    pub category: usize,
    pub location: usize,
}

impl Checkin {
    pub fn new(t: f64, user: usize, category: usize, location: usize) -> Self {
        Self {
            t,
            user,
            category,
            location,
        }
    }
}

/// Assignment of every location id to exactly one category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LayoutRepr", into = "LayoutRepr")]
pub struct LocationLayout {
    n_categories: usize,
    location_category: Vec<usize>,
    by_category: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct LayoutRepr {
    n_categories: usize,
    location_category: Vec<usize>,
}

impl TryFrom<LayoutRepr> for LocationLayout {
    type Error = Error;

    fn try_from(r: LayoutRepr) -> Result<Self> {
        LocationLayout::new(r.n_categories, r.location_category)
    }
}

impl From<LocationLayout> for LayoutRepr {
    fn from(l: LocationLayout) -> Self {
        LayoutRepr {
            n_categories: l.n_categories,
            location_category: l.location_category,
        }
    }
}

impl LocationLayout {
    pub fn new(n_categories: usize, location_category: Vec<usize>) -> Result<Self> {
        let mut by_category = vec![Vec::new(); n_categories];
        for (l, &c) in location_category.iter().enumerate() {
            if c >= n_categories {
                return Err(Error::invalid(format!(
                    "location {l} mapped to category {c}, but only {n_categories} categories exist"
                )));
            }
            by_category[c].push(l);
        }
        Ok(Self {
            n_categories,
            location_category,
            by_category,
        })
    }

    /// `per_category` locations for each of `n_categories` categories, numbered
    /// category-major (locations `c*per_category .. (c+1)*per_category` belong to `c`).
    pub fn uniform(n_categories: usize, per_category: usize) -> Self {
        let map = (0..n_categories * per_category)
            .map(|l| l / per_category)
            .collect();
        Self::new(n_categories, map).expect("uniform layout is always valid")
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    pub fn n_locations(&self) -> usize {
        self.location_category.len()
    }

    pub fn category_of(&self, location: usize) -> usize {
        self.location_category[location]
    }

    pub fn locations_of(&self, category: usize) -> &[usize] {
        &self.by_category[category]
    }

    pub fn location_category(&self) -> &[usize] {
        &self.location_category
    }
}

/// How the period index `k` of a past event is chosen when evaluating the
/// truncated periodic kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// `k = floor((t - t_i) / τ)`. Only the half of each Gaussian bump that
    /// lies after `t_i + kτ` is ever reached.
    #[default]
    PaperFloor,
    /// `k = round((t - t_i) / τ)`, the full truncated Gaussian around every
    /// period.
    NearestPeriod,
}

/// Hyper-parameters fixed during inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    /// Kernel period τ (hours).
    pub tau: f64,
    /// Gaussian kernel width σ (hours).
    pub sigma: f64,
    pub kernel_mode: KernelMode,
    /// Rate ω of the exponential decay in the location weights.
    pub spatial_decay: f64,
    /// Period indices above this bound contribute nothing.
    pub max_periods: u32,
    /// Pseudo-count added to every location's popularity inside `G₀`.
    /// Zero reproduces the plain popularity distribution.
    pub popularity_prior: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            tau: 12.0,
            sigma: 0.5,
            kernel_mode: KernelMode::PaperFloor,
            spatial_decay: 1.0,
            max_periods: 50,
            popularity_prior: 0.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tau.is_finite()
            && self.tau > 0.0
            && self.sigma.is_finite()
            && self.sigma > 0.0
            && self.spatial_decay.is_finite()
            && self.spatial_decay > 0.0
            && self.max_periods >= 1
            && self.popularity_prior.is_finite()
            && self.popularity_prior >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid hyper-parameters: {self:?}")))
        }
    }
}

/// Model parameters θ = {μ, β, α, η}, stored densely in row-major order.
///
/// `alpha[v * n + u]` is the influence of user `v` on user `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct ModelParams {
    n_users: usize,
    n_categories: usize,
    mu: Vec<f64>,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    eta: Vec<f64>,
}

/// JSON shape of [`ModelParams`]: nested dense arrays.
#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    mu: Vec<Vec<f64>>,
    beta: Vec<f64>,
    alpha: Vec<Vec<f64>>,
    eta: Vec<Vec<f64>>,
}

impl TryFrom<ParamsRepr> for ModelParams {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        let n = r.beta.len();
        let c = r.mu.first().map_or(0, Vec::len);
        let flat = |rows: Vec<Vec<f64>>, width: usize, name: &str| -> Result<Vec<f64>> {
            if rows.len() != n || rows.iter().any(|row| row.len() != width) {
                return Err(Error::Format(format!("`{name}` must be a {n}x{width} array")));
            }
            Ok(rows.into_iter().flatten().collect())
        };
        let mu = flat(r.mu, c, "mu")?;
        let alpha = flat(r.alpha, n, "alpha")?;
        let eta = flat(r.eta, c, "eta")?;
        ModelParams::from_parts(n, c, mu, r.beta, alpha, eta)
    }
}

impl From<ModelParams> for ParamsRepr {
    fn from(p: ModelParams) -> Self {
        let rows = |v: &[f64], w: usize| -> Vec<Vec<f64>> {
            if w == 0 {
                return vec![Vec::new(); p.n_users];
            }
            v.chunks(w).map(<[f64]>::to_vec).collect()
        };
        ParamsRepr {
            mu: rows(&p.mu, p.n_categories),
            beta: p.beta.clone(),
            alpha: rows(&p.alpha, p.n_users),
            eta: rows(&p.eta, p.n_categories),
        }
    }
}

impl ModelParams {
    pub fn zeros(n_users: usize, n_categories: usize) -> Self {
        Self {
            n_users,
            n_categories,
            mu: vec![0.0; n_users * n_categories],
            beta: vec![0.0; n_users],
            alpha: vec![0.0; n_users * n_users],
            eta: vec![0.0; n_users * n_categories],
        }
    }

    pub fn from_parts(
        n_users: usize,
        n_categories: usize,
        mu: Vec<f64>,
        beta: Vec<f64>,
        alpha: Vec<f64>,
        eta: Vec<f64>,
    ) -> Result<Self> {
        let nc = n_users * n_categories;
        if mu.len() != nc || eta.len() != nc || beta.len() != n_users || alpha.len() != n_users * n_users
        {
            return Err(Error::invalid(format!(
                "parameter shapes do not match N={n_users}, C={n_categories}"
            )));
        }
        let p = Self {
            n_users,
            n_categories,
            mu,
            beta,
            alpha,
            eta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self
            .mu
            .iter()
            .chain(&self.beta)
            .chain(&self.alpha)
            .chain(&self.eta)
            .any(|x| !x.is_finite() || *x < 0.0);
        if bad {
            return Err(Error::invalid("parameters must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    pub fn mu(&self, u: usize, c: usize) -> f64 {
        self.mu[u * self.n_categories + c]
    }

    pub fn beta(&self, u: usize) -> f64 {
        self.beta[u]
    }

    /// Influence of `v` on `u`.
    pub fn alpha(&self, v: usize, u: usize) -> f64 {
        self.alpha[v * self.n_users + u]
    }

    pub fn eta(&self, u: usize, c: usize) -> f64 {
        self.eta[u * self.n_categories + c]
    }

    pub fn set_mu(&mut self, u: usize, c: usize, x: f64) {
        self.mu[u * self.n_categories + c] = x;
    }

    pub fn set_beta(&mut self, u: usize, x: f64) {
        self.beta[u] = x;
    }

    pub fn set_alpha(&mut self, v: usize, u: usize, x: f64) {
        self.alpha[v * self.n_users + u] = x;
    }

    pub fn set_eta(&mut self, u: usize, c: usize, x: f64) {
        self.eta[u * self.n_categories + c] = x;
    }

    pub fn mu_slice(&self) -> &[f64] {
        &self.mu
    }

    pub fn beta_slice(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn eta_slice(&self) -> &[f64] {
        &self.eta
    }

    /// Zero every α entry whose edge is absent from `mask`.
    pub fn apply_mask(&mut self, mask: &SocialGraph) {
        for v in 0..self.n_users {
            for u in 0..self.n_users {
                if !mask.has_edge(v, u) {
                    self.set_alpha(v, u, 0.0);
                }
            }
        }
    }

    pub(crate) fn check_dims(&self, n_users: usize, n_categories: usize) -> Result<()> {
        if self.n_users != n_users || self.n_categories != n_categories {
            return Err(Error::invalid(format!(
                "parameters are {}x{} but the data has N={n_users}, C={n_categories}",
                self.n_users, self.n_categories
            )));
        }
        Ok(())
    }
}

/// Directed influence graph; an edge `v -> u` means `v` may influence `u`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SocialGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl SocialGraph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(n: usize, self_loops: bool) -> Self {
        let mut g = Self::new(n);
        for v in 0..n {
            for u in 0..n {
                if self_loops || u != v {
                    g.edges.insert((v, u));
                }
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::new(n);
        for (v, u) in edges {
            g.add_edge(v, u)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, v: usize, u: usize) -> Result<()> {
        if v >= self.n || u >= self.n {
            return Err(Error::invalid(format!(
                "edge {v}->{u} out of range for {} nodes",
                self.n
            )));
        }
        self.edges.insert((v, u));
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, v: usize, u: usize) -> bool {
        self.edges.contains(&(v, u))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Users `v` with an edge `v -> u`.
    pub fn in_neighbors(&self, u: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, dst)| dst == u)
            .map(|&(src, _)| src)
            .collect()
    }

    /// Users `w` with an edge `u -> w`.
    pub fn out_neighbors(&self, u: usize) -> Vec<usize> {
        self.edges
            .range((u, 0)..(u + 1, 0))
            .map(|&(_, dst)| dst)
            .collect()
    }
}
