//! TOML configuration. Every key is optional; `--seed`, `--threads` and
//! `--out-dir` override the top-level keys of the same name.

use std::path::{Path, PathBuf};

use checkins::experiment::{AlphaSupport, SyntheticConfig};
use checkins::graphs::{KroneckerSeed, ParamRanges};
use checkins::inference::EMConfig;
use checkins::predict::PredictMode;
use checkins::HyperParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Worker threads; 0 means one per core.
    pub threads: usize,
    pub out_dir: PathBuf,
    pub hyper: HyperParams,
    pub em: EMConfig,
    pub graph: GraphSection,
    pub simulate: SimulateSection,
    pub fit: FitSection,
    pub predict: PredictSection,
    pub evaluate: EvaluateSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            threads: 0,
            out_dir: PathBuf::from("out"),
            hyper: SyntheticConfig::default().hyper,
            em: EMConfig::default(),
            graph: GraphSection::default(),
            simulate: SimulateSection::default(),
            fit: FitSection::default(),
            predict: PredictSection::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

/// Graph for `simulate` and `kronecker`: an edge list, or a Kronecker
/// graph from a named structure or an explicit 2x2 seed matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub structure: String,
    pub power: u32,
    pub seed_matrix: Option<[[f64; 2]; 2]>,
    /// Keep sampled self-loops.
    pub self_loops: bool,
    pub edges: Option<PathBuf>,
    /// Node count of an edge-list graph.
    pub n_nodes: Option<usize>,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            structure: "core-periphery".into(),
            power: 4,
            seed_matrix: None,
            self_loops: false,
            edges: None,
            n_nodes: None,
        }
    }
}

impl GraphSection {
    pub fn kronecker_seed(&self) -> Result<KroneckerSeed, CliError> {
        let seed = match self.seed_matrix {
            Some(m) => KroneckerSeed::new(m, self.power)?,
            None => KroneckerSeed::named(&self.structure, self.power)?,
        };
        Ok(seed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n_categories: usize,
    pub locations_per_category: usize,
    pub ranges: ParamRanges,
    /// Ground truth from a file instead of `ranges`.
    pub params: Option<PathBuf>,
    /// With neither `n_events` nor `horizon` set, 4000 events.
    pub n_events: Option<usize>,
    pub horizon: Option<f64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let s = SyntheticConfig::default();
        Self {
            n_categories: s.n_categories,
            locations_per_category: s.locations_per_category,
            ranges: s.ranges,
            params: None,
            n_events: None,
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Defaults to `<out_dir>/events.csv`.
    pub events: Option<PathBuf>,
    /// Edge list restricting `α` to its edges.
    pub mask: Option<PathBuf>,
    /// Starting point: a `fit.json` or a `params.json`.
    pub init: Option<PathBuf>,
    /// Leading share of the log to fit on.
    pub train_fraction: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { events: None, mask: None, init: None, train_fraction: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    /// Defaults to `<out_dir>/events.csv`.
    pub events: Option<PathBuf>,
    /// Defaults to `<out_dir>/fit.json`.
    pub fit: Option<PathBuf>,
    /// Defaults to the end of the log.
    pub t_now: Option<f64>,
    pub mode: PredictMode,
    pub top_k: usize,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self { events: None, fit: None, t_now: None, mode: PredictMode::Median, top_k: 5 }
    }
}

/// The synthetic protocol: growing train prefixes, baselines on the held-out
/// split, sociality against `ᾱ/η̄` and interevent histograms.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub structure: String,
    pub power: u32,
    pub n_categories: usize,
    pub locations_per_category: usize,
    pub ranges: ParamRanges,
    pub n_events: usize,
    pub train_split: f64,
    /// Empty means the top-level seed alone.
    pub seeds: Vec<u64>,
    /// Shares of the training part.
    pub fractions: Vec<f64>,
    /// `α` support for MSE, log-likelihood and the comparison.
    pub mse_support: AlphaSupport,
    /// `α` support for edge AUC.
    pub auc_support: AlphaSupport,
    pub iteration_curve: bool,
    pub ks: Vec<usize>,
    /// Hours.
    pub time_thresholds: Vec<f64>,
    pub prediction_modes: Vec<PredictMode>,
    pub sociality_ratios: Vec<f64>,
    pub sociality_window: Option<f64>,
    pub interevent_betas: Vec<f64>,
    pub bin_width: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        let s = SyntheticConfig::default();
        Self {
            structure: s.structure,
            power: s.power,
            n_categories: s.n_categories,
            locations_per_category: s.locations_per_category,
            ranges: s.ranges,
            n_events: s.n_events,
            train_split: s.train_split,
            seeds: vec![1, 2, 3, 4, 5],
            fractions: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            mse_support: AlphaSupport::Graph,
            auc_support: AlphaSupport::Dense,
            iteration_curve: true,
            ks: vec![1, 2, 3, 4],
            time_thresholds: vec![6.0, 12.0, 18.0, 24.0, 36.0, 48.0, 72.0, 96.0],
            prediction_modes: vec![PredictMode::Median],
            sociality_ratios: vec![1.0, 10.0, 100.0],
            sociality_window: None,
            interevent_betas: vec![0.0, 1.0],
            bin_width: 1.0,
        }
    }
}

impl EvaluateSection {
    pub fn synthetic(&self, hyper: HyperParams, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            structure: self.structure.clone(),
            power: self.power,
            n_categories: self.n_categories,
            locations_per_category: self.locations_per_category,
            ranges: self.ranges,
            hyper,
            n_events: self.n_events,
            train_split: self.train_split,
            seed,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    /// Paths in the config resolve against the current directory; unset
    /// input paths fall back to files in `out_dir`.
    pub fn in_out_dir(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}
