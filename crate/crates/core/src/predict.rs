//! Next-check-in time forecasts and location rankings.
//!
//! Forecasts condition on the log's events at or before `t_now`; later
//! events are ignored. The conditional survival of the next event after
//! `t_now` is `exp(−Λ(t))` with `Λ(t) = ∫_{t_now}^t λ(s) ds` in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::spatial::{location_distribution, SpatialWeights};
use crate::temporal::{excitation_integral, IntensityContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictMode {
    /// Solve `Λ(t*) = ln 2`.
    #[default]
    Median,
    /// `t_now + ∫ exp(−Λ)` up to the 0.999 quantile.
    Mean,
}

const TIME_TOL: f64 = 1e-8;

/// Compensator of the chosen streams from `t_now`.
struct Compensator<'a> {
    ctx: &'a IntensityContext<'a>,
    user: usize,
    categories: Vec<usize>,
    t_now: f64,
}

impl Compensator<'_> {
    fn history(&self, c: usize) -> &[f64] {
        let times = self.ctx.log.user_category_times(self.user, c);
        &times[..times.partition_point(|&x| x <= self.t_now)]
    }

    fn base_rate(&self) -> f64 {
        self.categories.iter().map(|&c| self.ctx.params.mu(self.user, c)).sum()
    }

    fn at(&self, t: f64) -> f64 {
        let beta = self.ctx.params.beta(self.user);
        self.categories
            .iter()
            .map(|&c| {
                let mu = self.ctx.params.mu(self.user, c);
                mu * (t - self.t_now) + beta * excitation_integral(self.history(c), self.t_now, t, self.ctx.hyper)
            })
            .sum()
    }

    /// Latest time any history bump can still be active.
    fn excitation_end(&self) -> f64 {
        let reach = (self.ctx.hyper.max_periods as f64 + 1.0) * self.ctx.hyper.tau;
        self.t_now + reach
    }

    /// Smallest `t` with `Λ(t) ≥ target`.
    fn quantile(&self, target: f64) -> Result<f64> {
        let mut lo = self.t_now;
        let mut hi = self.t_now + self.ctx.hyper.tau;
        while self.at(hi) < target {
            let mu = self.base_rate();
            if hi > self.excitation_end() {
                if mu <= 0.0 {
                    return Err(Error::NoPrediction(self.user));
                }
                // beyond the history's reach Λ grows linearly
                let need = (target - self.at(hi)) / mu;
                lo = hi;
                hi += need * (1.0 + 1e-12) + TIME_TOL;
                continue;
            }
            lo = hi;
            hi = self.t_now + 2.0 * (hi - self.t_now);
        }
        while hi - lo > TIME_TOL * hi.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.at(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    fn survival_integral(&self, end: f64) -> f64 {
        let f = |t: f64| (-self.at(t)).exp();
        // split on period boundaries so each piece is smooth enough for Simpson
        let step = self.ctx.hyper.tau / 4.0;
        let mut a = self.t_now;
        let mut total = 0.0;
        while a < end {
            let b = (a + step).min(end);
            let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
            total += adaptive_simpson(&f, a, b, fa, fm, fb, 1e-12, 40);
            a = b;
        }
        total
    }

    fn predict(&self, mode: PredictMode) -> Result<f64> {
        match mode {
            PredictMode::Median => self.quantile(std::f64::consts::LN_2),
            PredictMode::Mean => {
                let end = self.quantile(-(1e-3f64).ln())?;
                Ok(self.t_now + self.survival_integral(end))
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1)
}

fn check(ctx: &IntensityContext<'_>, u: usize, t_now: f64) -> Result<()> {
    if u >= ctx.log.n_users() {
        return Err(Error::invalid(format!("user {u} out of range")));
    }
    if !t_now.is_finite() {
        return Err(Error::invalid("t_now must be finite"));
    }
    Ok(())
}

/// Time of `u`'s next check-in in any category (superposition of the
/// category streams).
pub fn predict_next_time(ctx: &IntensityContext<'_>, u: usize, t_now: f64, mode: PredictMode) -> Result<f64> {
    check(ctx, u, t_now)?;
    Compensator {
        ctx,
        user: u,
        categories: (0..ctx.log.n_categories()).collect(),
        t_now,
    }
    .predict(mode)
}

/// Time of `u`'s next check-in in category `c`.
pub fn predict_next_time_in(
    ctx: &IntensityContext<'_>,
    u: usize,
    c: usize,
    t_now: f64,
    mode: PredictMode,
) -> Result<f64> {
    check(ctx, u, t_now)?;
    if c >= ctx.log.n_categories() {
        return Err(Error::invalid(format!("category {c} out of range")));
    }
    Compensator {
        ctx,
        user: u,
        categories: vec![c],
        t_now,
    }
    .predict(mode)
}

/// `1 − exp(−∫_{t_now}^t λ_u)`: probability that `u` checks in by `t`.
pub fn next_time_cdf(ctx: &IntensityContext<'_>, u: usize, t_now: f64, t: f64) -> Result<f64> {
    check(ctx, u, t_now)?;
    if t < t_now {
        return Ok(0.0);
    }
    let comp = Compensator {
        ctx,
        user: u,
        categories: (0..ctx.log.n_categories()).collect(),
        t_now,
    };
    Ok(-(-comp.at(t)).exp_m1())
}

/// Sort `(location, probability)` by descending probability, ties by id.
pub fn rank_by_score(mut scored: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

/// Locations of category `c` ordered by `f_u(l | c, t)`.
pub fn rank_locations(
    weights: &SpatialWeights,
    params: &ModelParams,
    u: usize,
    c: usize,
) -> Result<Vec<(usize, f64)>> {
    let dist = location_distribution(weights, params, u, c)?;
    let scored = weights
        .layout()
        .locations_of(c)
        .iter()
        .map(|&l| (l, dist.probs[l]))
        .collect();
    Ok(rank_by_score(scored))
}
