//! Stochastic Kronecker graphs and ground-truth parameter sampling for
//! synthetic experiments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, SocialGraph};

/// 2x2 initiator matrix of edge probabilities, raised to the `power`-th
/// Kronecker power (giving `2^power` nodes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KroneckerSeed {
    pub probs: [[f64; 2]; 2],
    pub power: u32,
}

impl KroneckerSeed {
    pub fn new(probs: [[f64; 2]; 2], power: u32) -> Result<Self> {
        if probs.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("Kronecker seed entries must lie in [0, 1]"));
        }
        if power == 0 || power > 24 {
            return Err(Error::invalid(format!("Kronecker power must be in 1..=24, got {power}")));
        }
        Ok(Self { probs, power })
    }

    pub fn core_periphery(power: u32) -> Self {
        Self { probs: [[0.85, 0.45], [0.45, 0.3]], power }
    }

    pub fn heterophily(power: u32) -> Self {
        Self { probs: [[0.3, 0.89], [0.89, 0.3]], power }
    }

    pub fn hierarchical(power: u32) -> Self {
        Self { probs: [[0.9, 0.1], [0.1, 0.9]], power }
    }

    pub fn homophily(power: u32) -> Self {
        Self { probs: [[0.89, 0.3], [0.3, 0.89]], power }
    }

    pub fn erdos_renyi(power: u32) -> Self {
        Self { probs: [[0.6, 0.6], [0.6, 0.6]], power }
    }

    /// Look up one of the five named structures.
    pub fn named(name: &str, power: u32) -> Result<Self> {
        Ok(match name {
            "core-periphery" | "core_periphery" => Self::core_periphery(power),
            "heterophily" => Self::heterophily(power),
            "hierarchical" => Self::hierarchical(power),
            "homophily" => Self::homophily(power),
            "erdos-renyi" | "erdos_renyi" => Self::erdos_renyi(power),
            other => return Err(Error::invalid(format!("unknown Kronecker structure `{other}`"))),
        })
    }

    pub fn n_nodes(&self) -> usize {
        1 << self.power
    }

    /// `Π_b seed[i_b][j_b]` over the bits of the node ids.
    pub fn edge_probability(&self, i: usize, j: usize) -> f64 {
        (0..self.power)
            .map(|b| self.probs[(i >> b) & 1][(j >> b) & 1])
            .product()
    }

    /// Expected number of edges over all ordered pairs, self pairs included.
    pub fn expected_edges(&self) -> f64 {
        let s: f64 = self.probs.iter().flatten().sum();
        s.powi(self.power as i32)
    }
}

/// Sample every ordered pair `(i, j)`, `i != j`, independently with its
/// Kronecker probability. Node ids follow the bit decomposition directly.
pub fn kronecker_graph<R: Rng + ?Sized>(seed: &KroneckerSeed, rng: &mut R) -> SocialGraph {
    kronecker_graph_with_loops(seed, false, rng)
}

pub fn kronecker_graph_with_loops<R: Rng + ?Sized>(
    seed: &KroneckerSeed,
    self_loops: bool,
    rng: &mut R,
) -> SocialGraph {
    let n = seed.n_nodes();
    let mut g = SocialGraph::new(n);
    for i in 0..n {
        for j in 0..n {
            if i == j && !self_loops {
                continue;
            }
            let p = seed.edge_probability(i, j);
            if rng.random::<f64>() < p {
                g.add_edge(i, j).expect("ids are in range");
            }
        }
    }
    g
}

/// Uniform sampling ranges for the ground-truth parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamRanges {
    pub mu: (f64, f64),
    pub eta: (f64, f64),
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    /// Also draw `α_uu` for every user.
    pub self_influence: bool,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            mu: (0.0, 0.05),
            eta: (0.0, 0.05),
            alpha: (0.0, 0.5),
            beta: (0.0, 0.1),
            self_influence: false,
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draw parameters uniformly from `ranges`; `α` only on graph edges (and on
/// the diagonal when `self_influence` is set).
pub fn sample_ground_truth<R: Rng + ?Sized>(
    graph: &SocialGraph,
    n_categories: usize,
    ranges: &ParamRanges,
    rng: &mut R,
) -> Result<ModelParams> {
    for (lo, hi) in [ranges.mu, ranges.eta, ranges.alpha, ranges.beta] {
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::invalid(format!("bad sampling range ({lo}, {hi})")));
        }
    }
    let n = graph.n();
    let mut p = ModelParams::zeros(n, n_categories);
    for u in 0..n {
        for c in 0..n_categories {
            p.set_mu(u, c, uniform(rng, ranges.mu));
        }
    }
    for u in 0..n {
        p.set_beta(u, uniform(rng, ranges.beta));
    }
    for v in 0..n {
        for u in 0..n {
            if graph.has_edge(v, u) || (ranges.self_influence && u == v) {
                p.set_alpha(v, u, uniform(rng, ranges.alpha));
            }
        }
    }
    for u in 0..n {
        for c in 0..n_categories {
            p.set_eta(u, c, uniform(rng, ranges.eta));
        }
    }
    Ok(p)
}
