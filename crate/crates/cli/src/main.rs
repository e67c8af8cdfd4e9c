//! Command-line driver: simulate, fit, predict, evaluate, kronecker.

mod config;
mod evaluate;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use checkins::graphs::{kronecker_graph_with_loops, sample_ground_truth};
use checkins::inference::{fit, FitResult};
use checkins::io::{read_events, read_graph, read_json, sidecar_path, write_csv, write_events, write_graph, write_json};
use checkins::predict::{predict_next_time, rank_locations};
use checkins::simulate::{simulate, StopRule};
use checkins::spatial::compute_weights;
use checkins::temporal::IntensityContext;
use checkins::{EventLog, HyperParams, LocationLayout, ModelParams, SocialGraph};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::Config;

#[derive(Parser)]
#[command(name = "checkins", version, about = "Periodic check-in model: simulate, fit, predict, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample a graph and ground truth, then simulate check-ins.
    Simulate,
    /// Fit the model to an event log by EM.
    Fit,
    /// Next check-in times and location rankings from a fitted model.
    Predict,
    /// Run the synthetic protocol and write metrics and plot data.
    Evaluate,
    /// Sample a stochastic Kronecker graph.
    Kronecker,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Predict => "predict",
            Command::Evaluate => "evaluate",
            Command::Kronecker => "kronecker",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<checkins::Error> for CliError {
    fn from(e: checkins::Error) -> Self {
        use checkins::Error as E;
        match e {
            E::Numerical(_) | E::DegenerateDistribution { .. } | E::DegenerateEvent { .. } | E::NoPrediction(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Provenance written next to every command's outputs: `meta.json` for
/// `simulate`, `meta-<command>.json` for the others.
#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    /// SHA-256 of the effective config as JSON.
    config_sha256: String,
    inputs: Vec<InputHash>,
    config: &'a Config,
}

#[derive(Serialize)]
struct InputHash {
    path: PathBuf,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Input files read by a command, hashed for `meta.json`.
#[derive(Default)]
pub struct Inputs(Vec<InputHash>);

impl Inputs {
    pub fn add(&mut self, path: &Path) -> CliResult<()> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        self.0.push(InputHash { path: path.to_path_buf(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    fn add_events(&mut self, path: &Path) -> CliResult<()> {
        self.add(path)?;
        self.add(&sidecar_path(path))
    }
}

fn write_meta(cfg: &Config, command: Command, inputs: Inputs) -> CliResult<()> {
    let json = serde_json::to_vec(cfg).map_err(|e| CliError::Data(e.to_string()))?;
    let meta = Meta {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config_sha256: sha256_hex(&json),
        inputs: inputs.0,
        config: cfg,
    };
    let name = match command {
        Command::Simulate => "meta.json".to_string(),
        other => format!("meta-{}.json", other.name()),
    };
    Ok(write_json(&meta, &cfg.in_out_dir(&name))?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("checkins {}: {e}", cli.command.name());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.evaluate.seeds = vec![s];
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::Data(format!("{}: {e}", cfg.out_dir.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let command = cli.command;
    let inputs = pool.install(|| match command {
        Command::Simulate => cmd_simulate(&cfg),
        Command::Fit => cmd_fit(&cfg),
        Command::Predict => cmd_predict(&cfg),
        Command::Evaluate => evaluate::cmd_evaluate(&cfg),
        Command::Kronecker => cmd_kronecker(&cfg),
    })?;
    write_meta(&cfg, command, inputs)
}

fn support_graph(p: &ModelParams) -> SocialGraph {
    let n = p.n_users();
    let edges = (0..n).flat_map(|v| (0..n).map(move |u| (v, u))).filter(|&(v, u)| p.alpha(v, u) > 0.0);
    SocialGraph::from_edges(n, edges).expect("ids are in range")
}

fn cmd_simulate(cfg: &Config) -> CliResult<Inputs> {
    let sim = &cfg.simulate;
    let mut inputs = Inputs::default();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let (graph, truth) = match &sim.params {
        Some(path) => {
            inputs.add(path)?;
            let truth: ModelParams = read_json(path)?;
            truth.validate()?;
            let graph = match &cfg.graph.edges {
                Some(e) => {
                    inputs.add(e)?;
                    read_graph(e, truth.n_users())?
                }
                None => support_graph(&truth),
            };
            (graph, truth)
        }
        None => {
            let graph = match &cfg.graph.edges {
                Some(e) => {
                    inputs.add(e)?;
                    let n = cfg
                        .graph
                        .n_nodes
                        .ok_or_else(|| CliError::Data("graph.edges needs graph.n_nodes".into()))?;
                    read_graph(e, n)?
                }
                None => kronecker_graph_with_loops(&cfg.graph.kronecker_seed()?, cfg.graph.self_loops, &mut rng),
            };
            let truth = sample_ground_truth(&graph, sim.n_categories, &sim.ranges, &mut rng)?;
            (graph, truth)
        }
    };
    let layout = LocationLayout::uniform(truth.n_categories(), sim.locations_per_category);
    let stop = StopRule {
        horizon: sim.horizon,
        max_events: sim.n_events.or(if sim.horizon.is_none() { Some(4000) } else { None }),
    };
    let log = simulate(&truth, &cfg.hyper, &layout, stop, &mut rng)?;
    write_events(&log, &cfg.in_out_dir("events.csv"))?;
    write_json(&truth, &cfg.in_out_dir("params.json"))?;
    write_graph(&graph, &cfg.in_out_dir("graph.csv"))?;
    println!(
        "simulated {} events for {} users over {:.1} h into {}",
        log.len(),
        log.n_users(),
        log.horizon(),
        cfg.out_dir.display()
    );
    Ok(inputs)
}

/// Parameters from either a `fit.json` or a bare `params.json`.
fn read_params(path: &Path) -> CliResult<(ModelParams, Option<HyperParams>)> {
    let value: serde_json::Value = read_json(path)?;
    let bad = |e: serde_json::Error| CliError::Data(format!("{}: {e}", path.display()));
    if value.get("params").is_some() {
        let r: FitResult = serde_json::from_value(value).map_err(bad)?;
        Ok((r.params, Some(r.hyper)))
    } else {
        Ok((serde_json::from_value(value).map_err(bad)?, None))
    }
}

fn events_path(cfg: &Config, given: &Option<PathBuf>) -> PathBuf {
    given.clone().unwrap_or_else(|| cfg.in_out_dir("events.csv"))
}

fn load_events(path: &Path, inputs: &mut Inputs) -> CliResult<EventLog> {
    if !path.exists() {
        return Err(CliError::Data(format!("{}: events file not found", path.display())));
    }
    inputs.add_events(path)?;
    Ok(read_events(path)?)
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    loglik: f64,
    /// Maximized M-step objective; empty for the initial point.
    expected_complete: Option<f64>,
}

fn cmd_fit(cfg: &Config) -> CliResult<Inputs> {
    let mut inputs = Inputs::default();
    let path = events_path(cfg, &cfg.fit.events);
    let log = load_events(&path, &mut inputs)?;
    let train = checkins::experiment::train_prefix(&log, cfg.fit.train_fraction)?;
    let mask = match &cfg.fit.mask {
        Some(m) => {
            inputs.add(m)?;
            Some(read_graph(m, log.n_users())?)
        }
        None => None,
    };
    let init = match &cfg.fit.init {
        Some(p) => {
            inputs.add(p)?;
            Some(read_params(p)?.0)
        }
        None => None,
    };
    let em = checkins::inference::EMConfig { init_seed: cfg.seed, ..cfg.em };
    let result = fit(&train, &cfg.hyper, &em, init.as_ref(), mask.as_ref())?;
    write_json(&result, &cfg.in_out_dir("fit.json"))?;
    let rows: Vec<TraceRow> = result
        .loglik_trace
        .iter()
        .enumerate()
        .map(|(i, &ll)| TraceRow {
            iteration: i,
            loglik: ll,
            expected_complete: i.checked_sub(1).map(|j| result.expected_trace[j]),
        })
        .collect();
    write_csv(&rows, &cfg.in_out_dir("trace.csv"))?;
    println!(
        "fit {} events in {} EM iterations (converged: {}), log-likelihood {:.4}",
        train.len(),
        result.em_iters_used,
        result.converged,
        result.loglik_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(inputs)
}

#[derive(Serialize)]
struct PredictionRow {
    user: usize,
    t_now: f64,
    /// Empty when the user's intensity is identically zero.
    next_time: Option<f64>,
}

#[derive(Serialize)]
struct RankingRow {
    user: usize,
    category: usize,
    rank: usize,
    location: usize,
    probability: f64,
}

fn cmd_predict(cfg: &Config) -> CliResult<Inputs> {
    let mut inputs = Inputs::default();
    let pc = &cfg.predict;
    let log = load_events(&events_path(cfg, &pc.events), &mut inputs)?;
    let fit_path = pc.fit.clone().unwrap_or_else(|| cfg.in_out_dir("fit.json"));
    inputs.add(&fit_path)?;
    let (params, hyper) = read_params(&fit_path)?;
    let hyper = hyper.unwrap_or(cfg.hyper);
    let t_now = pc.t_now.unwrap_or(log.horizon());
    let ctx = IntensityContext::new(&log, &params, &hyper)?;
    let mut predictions = Vec::new();
    for u in 0..log.n_users() {
        let next_time = match predict_next_time(&ctx, u, t_now, pc.mode) {
            Ok(t) => Some(t),
            Err(checkins::Error::NoPrediction(_)) => None,
            Err(e) => return Err(e.into()),
        };
        predictions.push(PredictionRow { user: u, t_now, next_time });
    }
    let weights = compute_weights(&log, &hyper, t_now)?;
    let mut rankings = Vec::new();
    for u in 0..log.n_users() {
        for c in 0..log.n_categories() {
            let ranked = match rank_locations(&weights, &params, u, c) {
                Ok(r) => r,
                Err(checkins::Error::DegenerateDistribution { .. }) => continue,
                Err(e) => return Err(e.into()),
            };
            for (i, (location, probability)) in ranked.into_iter().take(pc.top_k).enumerate() {
                rankings.push(RankingRow { user: u, category: c, rank: i + 1, location, probability });
            }
        }
    }
    write_csv(&predictions, &cfg.in_out_dir("predictions.csv"))?;
    write_csv(&rankings, &cfg.in_out_dir("rankings.csv"))?;
    println!("predicted next check-ins for {} users from t = {t_now:.3}", log.n_users());
    Ok(inputs)
}

fn cmd_kronecker(cfg: &Config) -> CliResult<Inputs> {
    let seed = cfg.graph.kronecker_seed()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let graph = kronecker_graph_with_loops(&seed, cfg.graph.self_loops, &mut rng);
    write_graph(&graph, &cfg.in_out_dir("graph.csv"))?;
    println!(
        "sampled {} nodes, {} edges (expected {:.2} with self-loops)",
        graph.n(),
        graph.edge_count(),
        seed.expected_edges()
    );
    Ok(Inputs::default())
}
