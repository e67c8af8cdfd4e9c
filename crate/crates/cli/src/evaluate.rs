//! `evaluate`: the synthetic protocol over several seeds. Writes tidy
//! medians to `metrics.csv` and per-seed plot data to `plot-data/`.

use std::path::Path;

use checkins::experiment::{
    compare, fit_prefix, generate, interevent_for_beta, median, mse_by_iteration, sociality_for_ratio, Comparison,
    Instance,
};
use checkins::inference::EMConfig;
use checkins::io::{write_csv, MetricRow};
use checkins::metrics::time_threshold_curve;
use checkins::predict::{predict_next_time, PredictMode};
use checkins::temporal::IntensityContext;
use checkins::{EventLog, HyperParams, ModelParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::{CliError, CliResult, Inputs};

#[derive(Debug, Clone, Serialize)]
struct RecoveryRow {
    seed: u64,
    fraction: f64,
    n_train: usize,
    mse_joint: f64,
    mse_mu: f64,
    mse_beta: f64,
    mse_alpha: f64,
    mse_eta: f64,
    mse_temporal: f64,
    /// After rescaling each user's `(α_·u, η_u·)` onto the truth.
    mse_aligned_joint: f64,
    mse_aligned_alpha: f64,
    mse_aligned_eta: f64,
    auc: f64,
    test_loglik: f64,
    em_iters: usize,
    monotone: bool,
}

#[derive(Debug, Clone, Serialize)]
struct IterationRow {
    seed: u64,
    iteration: usize,
    mse_joint: f64,
    mse_temporal: f64,
    mse_aligned_joint: f64,
}

#[derive(Debug, Clone, Serialize)]
struct LoglikRow {
    seed: u64,
    model: &'static str,
    loglik: f64,
}

#[derive(Debug, Clone, Serialize)]
struct RankingRow {
    seed: u64,
    model: &'static str,
    k: usize,
    accuracy: f64,
    ndcg: f64,
}

#[derive(Debug, Clone, Serialize)]
struct TimeRow {
    seed: u64,
    mode: &'static str,
    threshold: f64,
    fraction_within: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SocialityRow {
    seed: u64,
    ratio: f64,
    sociality: f64,
}

#[derive(Debug, Clone, Serialize)]
struct HistogramRow {
    seed: u64,
    beta: f64,
    bin_start: f64,
    count: u64,
}

#[derive(Default)]
struct SeedResult {
    recovery: Vec<RecoveryRow>,
    iterations: Vec<IterationRow>,
    loglik: Vec<LoglikRow>,
    ranking: Vec<RankingRow>,
    time: Vec<TimeRow>,
    sociality: Vec<SocialityRow>,
    interevent: Vec<HistogramRow>,
}

fn mode_name(m: PredictMode) -> &'static str {
    match m {
        PredictMode::Median => "median",
        PredictMode::Mean => "mean",
    }
}

/// Absolute error of the predicted next check-in of each test event's
/// user, predicted from that user's previous check-in.
pub fn time_errors(
    params: &ModelParams,
    hyper: &HyperParams,
    log: &EventLog,
    test_start: f64,
    mode: PredictMode,
) -> checkins::Result<Vec<f64>> {
    let ctx = IntensityContext::new(log, params, hyper)?;
    let mut last = vec![None; log.n_users()];
    let mut errors = Vec::new();
    for e in log.events() {
        if e.t >= test_start {
            if let Some(prev) = last[e.user] {
                match predict_next_time(&ctx, e.user, prev, mode) {
                    Ok(t) => errors.push((t - e.t).abs()),
                    Err(checkins::Error::NoPrediction(_)) => {}
                    Err(err) => return Err(err),
                }
            }
        }
        last[e.user] = Some(e.t);
    }
    Ok(errors)
}

fn run_seed(cfg: &Config, em: &EMConfig, seed: u64) -> CliResult<SeedResult> {
    let ev = &cfg.evaluate;
    let synth = ev.synthetic(cfg.hyper, seed);
    let inst: Instance = generate(&synth)?;
    let mut out = SeedResult::default();

    let mut full_fit = None;
    for &f in &ev.fractions {
        let (result, p) = fit_prefix(&inst, f, em, ev.mse_support)?;
        let auc = if ev.auc_support == ev.mse_support {
            p.auc
        } else {
            fit_prefix(&inst, f, em, ev.auc_support)?.1.auc
        };
        out.recovery.push(RecoveryRow {
            seed,
            fraction: f,
            n_train: p.n_train,
            mse_joint: p.mse.joint,
            mse_mu: p.mse.mu,
            mse_beta: p.mse.beta,
            mse_alpha: p.mse.alpha,
            mse_eta: p.mse.eta,
            mse_temporal: p.mse.temporal,
            mse_aligned_joint: p.mse_aligned.joint,
            mse_aligned_alpha: p.mse_aligned.alpha,
            mse_aligned_eta: p.mse_aligned.eta,
            auc,
            test_loglik: p.test_loglik,
            em_iters: p.em_iters,
            monotone: p.monotone,
        });
        if f >= 1.0 {
            full_fit = Some(result);
        }
    }
    let full_fit = match full_fit {
        Some(r) => r,
        None => fit_prefix(&inst, 1.0, em, ev.mse_support)?.0,
    };

    if ev.iteration_curve {
        let (_, errors) = mse_by_iteration(&inst, 1.0, em, ev.mse_support)?;
        out.iterations = errors
            .iter()
            .map(|e| IterationRow {
                seed,
                iteration: e.iteration,
                mse_joint: e.mse.joint,
                mse_temporal: e.mse.temporal,
                mse_aligned_joint: e.mse_aligned.joint,
            })
            .collect();
    }

    if !ev.ks.is_empty() {
        let c: Comparison = compare(&inst, em, ev.mse_support, &ev.ks)?;
        for (model, loglik) in [
            ("proposed", c.loglik_proposed),
            ("proposed_with_location", c.loglik_proposed_full),
            ("hawkes", c.loglik_hawkes),
            ("multihawkes", c.loglik_multihawkes),
        ] {
            out.loglik.push(LoglikRow { seed, model, loglik });
        }
        for (m, model) in Comparison::MODELS.iter().enumerate() {
            for (j, &k) in c.ks.iter().enumerate() {
                out.ranking.push(RankingRow { seed, model, k, accuracy: c.accuracy[m][j], ndcg: c.ndcg[m][j] });
            }
        }
    }

    let test_start = inst.test_start()?;
    for &mode in &ev.prediction_modes {
        let errors = time_errors(&full_fit.params, &inst.hyper, &inst.log, test_start, mode)?;
        if errors.is_empty() {
            continue;
        }
        let curve = time_threshold_curve(&errors, &ev.time_thresholds)?;
        for (&threshold, &fraction_within) in ev.time_thresholds.iter().zip(&curve) {
            out.time.push(TimeRow { seed, mode: mode_name(mode), threshold, fraction_within });
        }
    }

    for &ratio in &ev.sociality_ratios {
        let (_, per_user) = sociality_for_ratio(&synth, ratio, ev.sociality_window)?;
        out.sociality
            .extend(per_user.into_iter().map(|sociality| SocialityRow { seed, ratio, sociality }));
    }

    for &beta in &ev.interevent_betas {
        let h = interevent_for_beta(&synth, beta, ev.bin_width)?;
        out.interevent.extend(
            h.counts
                .iter()
                .enumerate()
                .map(|(i, &count)| HistogramRow { seed, beta, bin_start: h.bin_start(i), count }),
        );
    }
    Ok(out)
}

fn medians_by<R, K: PartialEq + Clone>(rows: &[R], key: impl Fn(&R) -> K, value: impl Fn(&R) -> f64) -> Vec<(K, f64)> {
    let mut keys: Vec<K> = Vec::new();
    for r in rows {
        let k = key(r);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|k| {
            let xs: Vec<f64> = rows.iter().filter(|r| key(r) == k).map(&value).collect();
            (k, median(&xs))
        })
        .collect()
}

fn summarize(all: &SeedResult) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    let recovery: [(&str, fn(&RecoveryRow) -> f64); 6] = [
        ("mse_joint", |r| r.mse_joint),
        ("mse_temporal", |r| r.mse_temporal),
        ("mse_aligned_joint", |r| r.mse_aligned_joint),
        ("auc", |r| r.auc),
        ("test_loglik", |r| r.test_loglik),
        ("em_iters", |r| r.em_iters as f64),
    ];
    for (name, f) in recovery {
        for (frac, v) in medians_by(&all.recovery, |r| r.fraction.to_bits(), f) {
            rows.push(MetricRow::new(name, format!("fraction={}", f64::from_bits(frac)), v));
        }
    }
    for ((model, _), v) in medians_by(&all.loglik, |r| (r.model, ()), |r| r.loglik) {
        rows.push(MetricRow::new("avg_pred_loglik", format!("model={model}"), v));
    }
    for ((model, k), v) in medians_by(&all.ranking, |r| (r.model, r.k), |r| r.accuracy) {
        rows.push(MetricRow::new("accuracy", format!("model={model};k={k}"), v));
    }
    for ((model, k), v) in medians_by(&all.ranking, |r| (r.model, r.k), |r| r.ndcg) {
        rows.push(MetricRow::new("ndcg", format!("model={model};k={k}"), v));
    }
    for ((mode, t), v) in medians_by(&all.time, |r| (r.mode, r.threshold.to_bits()), |r| r.fraction_within) {
        rows.push(MetricRow::new(
            "time_within_threshold",
            format!("mode={mode};threshold={}", f64::from_bits(t)),
            v,
        ));
    }
    // mean per seed, then the median over seeds
    let mut by_seed: Vec<((u64, u64), f64)> = Vec::new();
    for r in &all.sociality {
        let key = (r.seed, r.ratio.to_bits());
        if !by_seed.iter().any(|(k, _)| *k == key) {
            let xs: Vec<f64> = all
                .sociality
                .iter()
                .filter(|s| (s.seed, s.ratio.to_bits()) == key)
                .map(|s| s.sociality)
                .collect();
            by_seed.push((key, xs.iter().sum::<f64>() / xs.len() as f64));
        }
    }
    for (ratio, v) in medians_by(&by_seed, |(k, _)| k.1, |(_, m)| *m) {
        rows.push(MetricRow::new("sociality_mean", format!("ratio={}", f64::from_bits(ratio)), v));
    }
    rows
}

pub fn cmd_evaluate(cfg: &Config) -> CliResult<Inputs> {
    let ev = &cfg.evaluate;
    if ev.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(CliError::Data("evaluate.fractions must lie in (0, 1]".into()));
    }
    let seeds = if ev.seeds.is_empty() { vec![cfg.seed] } else { ev.seeds.clone() };
    let results: Vec<SeedResult> = seeds
        .par_iter()
        .map(|&s| run_seed(cfg, &cfg.em, s))
        .collect::<CliResult<_>>()?;
    let mut all = SeedResult::default();
    for r in results {
        all.recovery.extend(r.recovery);
        all.iterations.extend(r.iterations);
        all.loglik.extend(r.loglik);
        all.ranking.extend(r.ranking);
        all.time.extend(r.time);
        all.sociality.extend(r.sociality);
        all.interevent.extend(r.interevent);
    }
    let plot = cfg.out_dir.join("plot-data");
    std::fs::create_dir_all(&plot).map_err(|e| CliError::Data(format!("{}: {e}", plot.display())))?;
    let put = |rows: &dyn Fn(&Path) -> checkins::Result<()>, name: &str| rows(&plot.join(name));
    put(&|p| write_csv(&all.recovery, p), "recovery.csv")?;
    put(&|p| write_csv(&all.iterations, p), "em_iterations.csv")?;
    put(&|p| write_csv(&all.loglik, p), "loglik.csv")?;
    put(&|p| write_csv(&all.ranking, p), "ranking.csv")?;
    put(&|p| write_csv(&all.time, p), "time_threshold.csv")?;
    put(&|p| write_csv(&all.sociality, p), "sociality.csv")?;
    put(&|p| write_csv(&all.interevent, p), "interevent.csv")?;
    let metrics = summarize(&all);
    write_csv(&metrics, &cfg.in_out_dir("metrics.csv"))?;
    println!("evaluated {} seeds; {} metric rows in {}", seeds.len(), metrics.len(), cfg.out_dir.display());
    Ok(Inputs::default())
}
