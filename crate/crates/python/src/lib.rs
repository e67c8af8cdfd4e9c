//! Python bindings, imported as `checkins`.

use std::path::PathBuf;

use checkins::experiment::SyntheticConfig;
use checkins::graphs::{kronecker_graph_with_loops, sample_ground_truth, KroneckerSeed, ParamRanges};
use checkins::inference::EMConfig;
use checkins::metrics::{self, FriendDirection, NdcgMode};
use checkins::predict::{self, PredictMode};
use checkins::simulate::StopRule;
use checkins::spatial::compute_weights;
use checkins::temporal::IntensityContext;
use checkins::{io, Checkin, LocationLayout};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn err(e: checkins::Error) -> PyErr {
    use checkins::Error as E;
    match e {
        E::Io(_) => PyIOError::new_err(e.to_string()),
        E::Numerical(_) | E::DegenerateDistribution { .. } | E::DegenerateEvent { .. } | E::NoPrediction(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for checkins::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

/// Fixed hyper-parameters. Defaults: τ = 12 h, σ = 0.5 h, ω = 1/h,
/// 50 periods, popularity pseudo-count 1.
#[pyclass(name = "HyperParams", skip_from_py_object)]
#[derive(Clone)]
struct PyHyper {
    #[pyo3(get, set)]
    tau: f64,
    #[pyo3(get, set)]
    sigma: f64,
    #[pyo3(get, set)]
    spatial_decay: f64,
    #[pyo3(get, set)]
    max_periods: u32,
    #[pyo3(get, set)]
    popularity_prior: f64,
}

impl PyHyper {
    fn inner(&self) -> checkins::HyperParams {
        checkins::HyperParams {
            tau: self.tau,
            sigma: self.sigma,
            spatial_decay: self.spatial_decay,
            max_periods: self.max_periods,
            popularity_prior: self.popularity_prior,
            ..checkins::HyperParams::default()
        }
    }
}

fn default_hyper() -> checkins::HyperParams {
    SyntheticConfig::default().hyper
}

fn hyper_or_default(h: Option<&PyHyper>) -> checkins::HyperParams {
    h.map(PyHyper::inner).unwrap_or_else(default_hyper)
}

#[pymethods]
impl PyHyper {
    #[new]
    #[pyo3(signature = (tau = 12.0, sigma = 0.5, spatial_decay = 1.0, max_periods = 50, popularity_prior = 1.0))]
    fn new(tau: f64, sigma: f64, spatial_decay: f64, max_periods: u32, popularity_prior: f64) -> PyResult<Self> {
        let h = Self { tau, sigma, spatial_decay, max_periods, popularity_prior };
        h.inner().validate().py()?;
        Ok(h)
    }

    fn __repr__(&self) -> String {
        format!(
            "HyperParams(tau={}, sigma={}, spatial_decay={}, max_periods={}, popularity_prior={})",
            self.tau, self.sigma, self.spatial_decay, self.max_periods, self.popularity_prior
        )
    }
}

/// Directed graph; an edge `(v, u)` means `v` influences `u`.
#[pyclass(name = "SocialGraph", skip_from_py_object)]
#[derive(Clone)]
struct PyGraph(checkins::SocialGraph);

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (n, edges = Vec::new()))]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self(checkins::SocialGraph::from_edges(n, edges).py()?))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().collect()
    }

    fn edge_count(&self) -> usize {
        self.0.edge_count()
    }

    fn has_edge(&self, v: usize, u: usize) -> bool {
        self.0.has_edge(v, u)
    }

    #[staticmethod]
    fn read_csv(path: PathBuf, n: usize) -> PyResult<Self> {
        Ok(Self(io::read_graph(&path, n).py()?))
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        io::write_graph(&self.0, &path).py()
    }

    fn __repr__(&self) -> String {
        format!("SocialGraph(n={}, edges={})", self.0.n(), self.0.edge_count())
    }
}

/// Model parameters as flat row-major lists: `mu[u*C + c]`, `beta[u]`,
/// `alpha[v*N + u]`, `eta[u*C + c]`.
#[pyclass(name = "ModelParams", skip_from_py_object)]
#[derive(Clone)]
struct PyParams(checkins::ModelParams);

#[pymethods]
impl PyParams {
    #[new]
    fn new(n_users: usize, n_categories: usize, mu: Vec<f64>, beta: Vec<f64>, alpha: Vec<f64>, eta: Vec<f64>) -> PyResult<Self> {
        Ok(Self(checkins::ModelParams::from_parts(n_users, n_categories, mu, beta, alpha, eta).py()?))
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.0.n_users()
    }

    #[getter]
    fn n_categories(&self) -> usize {
        self.0.n_categories()
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.0.mu_slice().to_vec()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.0.beta_slice().to_vec()
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.0.alpha_slice().to_vec()
    }

    #[getter]
    fn eta(&self) -> Vec<f64> {
        self.0.eta_slice().to_vec()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let p: checkins::ModelParams = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        p.validate().py()?;
        Ok(Self(p))
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(n_users={}, n_categories={})", self.0.n_users(), self.0.n_categories())
    }
}

/// Time-ordered check-ins `(t, user, category, location)` observed on
/// `[0, horizon)`.
#[pyclass(name = "EventLog", skip_from_py_object)]
#[derive(Clone)]
struct PyLog(checkins::EventLog);

#[pymethods]
impl PyLog {
    #[new]
    fn new(n_users: usize, location_category: Vec<usize>, events: Vec<(f64, usize, usize, usize)>, horizon: f64) -> PyResult<Self> {
        let n_categories = location_category.iter().max().map_or(0, |c| c + 1);
        let layout = LocationLayout::new(n_categories, location_category).py()?;
        let evs = events.into_iter().map(|(t, u, c, l)| Checkin::new(t, u, c, l)).collect();
        Ok(Self(checkins::EventLog::new(n_users, layout, evs, horizon).py()?))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.0.n_users()
    }

    #[getter]
    fn n_categories(&self) -> usize {
        self.0.n_categories()
    }

    #[getter]
    fn n_locations(&self) -> usize {
        self.0.n_locations()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon()
    }

    fn events(&self) -> Vec<(f64, usize, usize, usize)> {
        self.0.events().iter().map(|e| (e.t, e.user, e.category, e.location)).collect()
    }

    /// Leading `train_fraction` of the events and the rest.
    fn split(&self, train_fraction: f64) -> PyResult<(Self, Self)> {
        let (a, b) = self.0.split(train_fraction).py()?;
        Ok((Self(a), Self(b)))
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self(io::read_events(&path).py()?))
    }

    /// Writes the CSV and its JSON sidecar.
    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        io::write_events(&self.0, &path).py()
    }

    fn __repr__(&self) -> String {
        format!(
            "EventLog(events={}, users={}, categories={}, locations={}, horizon={:.3})",
            self.0.len(),
            self.0.n_users(),
            self.0.n_categories(),
            self.0.n_locations(),
            self.0.horizon()
        )
    }
}

#[pyclass(name = "FitResult")]
struct PyFit(checkins::inference::FitResult);

#[pymethods]
impl PyFit {
    #[getter]
    fn params(&self) -> PyParams {
        PyParams(self.0.params.clone())
    }

    #[getter]
    fn loglik_trace(&self) -> Vec<f64> {
        self.0.loglik_trace.clone()
    }

    #[getter]
    fn em_iters_used(&self) -> usize {
        self.0.em_iters_used
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Stochastic Kronecker graph from a named 2x2 seed.
#[pyfunction]
#[pyo3(signature = (structure = "core-periphery", power = 4, seed = 1, self_loops = false))]
fn kronecker_graph(structure: &str, power: u32, seed: u64, self_loops: bool) -> PyResult<PyGraph> {
    let s = KroneckerSeed::named(structure, power).py()?;
    Ok(PyGraph(kronecker_graph_with_loops(&s, self_loops, &mut ChaCha20Rng::seed_from_u64(seed))))
}

/// Uniform ground truth on the graph's edges.
#[pyfunction]
#[pyo3(signature = (graph, n_categories, seed = 1))]
fn ground_truth(graph: &PyGraph, n_categories: usize, seed: u64) -> PyResult<PyParams> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(PyParams(sample_ground_truth(&graph.0, n_categories, &ParamRanges::default(), &mut rng).py()?))
}

/// Simulate until `n_events` check-ins or time `horizon`.
#[pyfunction]
#[pyo3(signature = (params, locations_per_category, n_events = None, horizon = None, seed = 1, hyper = None))]
fn simulate(
    params: &PyParams,
    locations_per_category: usize,
    n_events: Option<usize>,
    horizon: Option<f64>,
    seed: u64,
    hyper: Option<&PyHyper>,
) -> PyResult<PyLog> {
    let layout = LocationLayout::uniform(params.0.n_categories(), locations_per_category);
    let stop = StopRule { horizon, max_events: n_events };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let log = checkins::simulate::simulate(&params.0, &hyper_or_default(hyper), &layout, stop, &mut rng).py()?;
    Ok(PyLog(log))
}

/// Graph, ground truth and log of the synthetic protocol, as
/// `(graph, truth, log)`.
#[pyfunction]
#[pyo3(signature = (seed = 1, power = 4, n_categories = 2, locations_per_category = 4, n_events = 4000))]
fn generate(
    seed: u64,
    power: u32,
    n_categories: usize,
    locations_per_category: usize,
    n_events: usize,
) -> PyResult<(PyGraph, PyParams, PyLog)> {
    let cfg = SyntheticConfig { seed, power, n_categories, locations_per_category, n_events, ..SyntheticConfig::default() };
    let inst = checkins::experiment::generate(&cfg).py()?;
    Ok((PyGraph(inst.graph), PyParams(inst.truth), PyLog(inst.log)))
}

/// EM fit; `mask` restricts `α` to the graph's edges.
#[pyfunction]
#[pyo3(signature = (log, hyper = None, mask = None, init = None, max_em_iters = 50, tol = 1e-4, init_seed = 0))]
fn fit(
    py: Python<'_>,
    log: &PyLog,
    hyper: Option<&PyHyper>,
    mask: Option<&PyGraph>,
    init: Option<&PyParams>,
    max_em_iters: usize,
    tol: f64,
    init_seed: u64,
) -> PyResult<PyFit> {
    let cfg = EMConfig { max_em_iters, tol, init_seed, ..EMConfig::default() };
    let h = hyper_or_default(hyper);
    let (log, mask, init) = (&log.0, mask.map(|g| &g.0), init.map(|p| &p.0));
    let r = py.detach(|| checkins::inference::fit(log, &h, &cfg, init, mask)).py()?;
    Ok(PyFit(r))
}

fn parse_mode(mode: &str) -> PyResult<PredictMode> {
    match mode {
        "median" => Ok(PredictMode::Median),
        "mean" => Ok(PredictMode::Mean),
        other => Err(PyValueError::new_err(format!("mode must be 'median' or 'mean', got {other:?}"))),
    }
}

/// Next check-in time of `user` after `t_now`.
#[pyfunction]
#[pyo3(signature = (log, params, user, t_now, mode = "median", hyper = None))]
fn predict_next_time(log: &PyLog, params: &PyParams, user: usize, t_now: f64, mode: &str, hyper: Option<&PyHyper>) -> PyResult<f64> {
    let h = hyper_or_default(hyper);
    let ctx = IntensityContext::new(&log.0, &params.0, &h).py()?;
    predict::predict_next_time(&ctx, user, t_now, parse_mode(mode)?).py()
}

/// `(location, probability)` for category `category`, most likely first.
#[pyfunction]
#[pyo3(signature = (log, params, user, category, t, hyper = None))]
fn rank_locations(log: &PyLog, params: &PyParams, user: usize, category: usize, t: f64, hyper: Option<&PyHyper>) -> PyResult<Vec<(usize, f64)>> {
    let w = compute_weights(&log.0, &hyper_or_default(hyper), t).py()?;
    predict::rank_locations(&w, &params.0, user, category).py()
}

/// Held-out log-likelihood per event of the check-ins from `test_start` on.
#[pyfunction]
#[pyo3(signature = (log, params, test_start, hyper = None))]
fn avg_pred_loglik(log: &PyLog, params: &PyParams, test_start: f64, hyper: Option<&PyHyper>) -> PyResult<f64> {
    metrics::avg_pred_loglik(&params.0, &hyper_or_default(hyper), &log.0, test_start).py()
}

/// MSE per block: keys `joint`, `mu`, `beta`, `alpha`, `eta`, `temporal`.
#[pyfunction]
#[pyo3(signature = (estimate, truth, aligned = false))]
fn param_mse<'py>(py: Python<'py>, estimate: &PyParams, truth: &PyParams, aligned: bool) -> PyResult<Bound<'py, PyDict>> {
    let m = if aligned {
        metrics::aligned_mse_blocks(&estimate.0, &truth.0)
    } else {
        metrics::param_mse_blocks(&estimate.0, &truth.0)
    }
    .py()?;
    let d = PyDict::new(py);
    for (k, v) in [("joint", m.joint), ("mu", m.mu), ("beta", m.beta), ("alpha", m.alpha), ("eta", m.eta), ("temporal", m.temporal)] {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// AUC of `α` as a score for the edges of `graph`.
#[pyfunction]
fn edge_auc(params: &PyParams, graph: &PyGraph) -> PyResult<f64> {
    metrics::edge_auc(params.0.alpha_slice(), &graph.0).py()
}

#[pyfunction]
fn accuracy_at_k(rankings: Vec<Vec<usize>>, truths: Vec<usize>, k: usize) -> PyResult<f64> {
    metrics::accuracy_at_k(&rankings, &truths, k).py()
}

#[pyfunction]
fn ndcg_at_k(rankings: Vec<Vec<usize>>, truths: Vec<usize>, k: usize) -> PyResult<f64> {
    metrics::ndcg_at_k(&rankings, &truths, k, NdcgMode::Corrected).py()
}

/// Per user, the share of check-ins at a location the user or an
/// influencer visited before (`None` for users without check-ins).
#[pyfunction]
#[pyo3(signature = (log, graph, window = None))]
fn sociality(log: &PyLog, graph: &PyGraph, window: Option<f64>) -> PyResult<Vec<Option<f64>>> {
    metrics::sociality(&log.0, &graph.0, window, FriendDirection::In).py()
}

#[pymodule]
#[pyo3(name = "checkins")]
fn checkins_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHyper>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyLog>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(kronecker_graph, m)?)?;
    m.add_function(wrap_pyfunction!(ground_truth, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(predict_next_time, m)?)?;
    m.add_function(wrap_pyfunction!(rank_locations, m)?)?;
    m.add_function(wrap_pyfunction!(avg_pred_loglik, m)?)?;
    m.add_function(wrap_pyfunction!(param_mse, m)?)?;
    m.add_function(wrap_pyfunction!(edge_auc, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(sociality, m)?)?;
    Ok(())
}
