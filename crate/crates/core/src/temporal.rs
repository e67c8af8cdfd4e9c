//! Periodic doubly-stochastic intensity of check-in times.
//!
//! ```text
//! λ_u(t, c) = μ_uc + β_u Σ_{t_i ∈ D_uc(t)} h(t − t_i − k_i τ) exp(−k_i)
//! h(x)      = exp(−x² / 2σ²) · 1{|x| ≤ τ/2}
//! ```
//!
//! Only the user's own history in the category enters the sum. `k_i` is
//! chosen by [`KernelMode`]; period indices outside `1..=max_periods` are
//! dropped.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::log::EventLog;
use crate::model::{Checkin, HyperParams, KernelMode, ModelParams};

/// Truncated Gaussian kernel; the truncation boundary is inclusive.
pub fn kernel(dt: f64, hyper: &HyperParams) -> f64 {
    if dt.abs() <= hyper.tau / 2.0 {
        (-dt * dt / (2.0 * hyper.sigma * hyper.sigma)).exp()
    } else {
        0.0
    }
}

/// Period index and offset from the period centre for an event `elapsed`
/// hours in the past.
fn period_offset(elapsed: f64, hyper: &HyperParams) -> (f64, f64) {
    let k = match hyper.kernel_mode {
        KernelMode::PaperFloor => (elapsed / hyper.tau).floor(),
        KernelMode::NearestPeriod => (elapsed / hyper.tau).round(),
    };
    (k, elapsed - k * hyper.tau)
}

/// Contribution of one past event to the periodic sum at `elapsed > 0`.
fn event_excitation(elapsed: f64, hyper: &HyperParams) -> f64 {
    let (k, offset) = period_offset(elapsed, hyper);
    if k < 1.0 || k > hyper.max_periods as f64 {
        return 0.0;
    }
    kernel(offset, hyper) * (-k).exp()
}

/// `Σ_i h(t − t_i − k_i τ) exp(−k_i)` over the sorted `times` strictly before `t`.
pub fn excitation(times: &[f64], t: f64, hyper: &HyperParams) -> f64 {
    let end = times.partition_point(|&x| x < t);
    let reach = (hyper.max_periods as f64 + 1.0) * hyper.tau;
    let mut total = 0.0;
    for &ti in times[..end].iter().rev() {
        let elapsed = t - ti;
        if elapsed > reach {
            break;
        }
        total += event_excitation(elapsed, hyper);
    }
    total
}

/// `∫_{x1}^{x2} exp(−x² / 2σ²) dx`, accurate in the tails.
fn gaussian_mass(x1: f64, x2: f64, sigma: f64) -> f64 {
    if x2 <= x1 {
        return 0.0;
    }
    let scale = sigma * (PI / 2.0).sqrt();
    let z1 = x1 * FRAC_1_SQRT_2 / sigma;
    let z2 = x2 * FRAC_1_SQRT_2 / sigma;
    let diff = if z1 >= 0.0 {
        libm::erfc(z1) - libm::erfc(z2)
    } else if z2 <= 0.0 {
        libm::erfc(-z2) - libm::erfc(-z1)
    } else {
        libm::erf(z2) - libm::erf(z1)
    };
    scale * diff.max(0.0)
}

/// Support of the period-`k` bump of an event at `ti`, as offsets from its
/// centre `ti + kτ`.
fn bump_support(hyper: &HyperParams) -> (f64, f64) {
    let half = hyper.tau / 2.0;
    match hyper.kernel_mode {
        KernelMode::PaperFloor => (0.0, half),
        KernelMode::NearestPeriod => (-half, half),
    }
}

/// `∫_a^b` of one event's periodic contribution (without `β`).
pub fn event_integral(ti: f64, a: f64, b: f64, hyper: &HyperParams) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (lo, hi) = bump_support(hyper);
    let tau = hyper.tau;
    let k_first = (((a - ti - hi) / tau).floor()).max(1.0);
    let k_last = (((b - ti - lo) / tau).ceil()).min(hyper.max_periods as f64);
    let mut total = 0.0;
    let mut k = k_first;
    while k <= k_last {
        let centre = ti + k * tau;
        let x1 = (a - centre).max(lo);
        let x2 = (b - centre).min(hi);
        if x2 > x1 {
            total += (-k).exp() * gaussian_mass(x1, x2, hyper.sigma);
        }
        k += 1.0;
    }
    total
}

/// `∫_a^b` of the periodic sum generated by every event in `times`.
pub fn excitation_integral(times: &[f64], a: f64, b: f64, hyper: &HyperParams) -> f64 {
    if b <= a {
        return 0.0;
    }
    let reach = (hyper.max_periods as f64 + 1.0) * hyper.tau;
    let end = times.partition_point(|&x| x < b);
    let start = times.partition_point(|&x| x < a - reach);
    times[start..end]
        .iter()
        .map(|&ti| event_integral(ti, a, b, hyper))
        .sum()
}

/// Evaluation context for the intensity of every (user, category) stream.
#[derive(Debug, Clone, Copy)]
pub struct IntensityContext<'a> {
    pub log: &'a EventLog,
    pub params: &'a ModelParams,
    pub hyper: &'a HyperParams,
}

impl<'a> IntensityContext<'a> {
    pub fn new(log: &'a EventLog, params: &'a ModelParams, hyper: &'a HyperParams) -> Result<Self> {
        params.check_dims(log.n_users(), log.n_categories())?;
        hyper.validate()?;
        Ok(Self { log, params, hyper })
    }

    fn check_ids(&self, u: usize, c: usize) -> Result<()> {
        if u >= self.log.n_users() || c >= self.log.n_categories() {
            return Err(Error::invalid(format!(
                "(user {u}, category {c}) out of range for N={}, C={}",
                self.log.n_users(),
                self.log.n_categories()
            )));
        }
        Ok(())
    }

    /// `λ_u(t, c)` from the history strictly before `t`.
    pub fn intensity(&self, u: usize, c: usize, t: f64) -> Result<f64> {
        self.check_ids(u, c)?;
        Ok(self.intensity_unchecked(u, c, t))
    }

    pub(crate) fn intensity_unchecked(&self, u: usize, c: usize, t: f64) -> f64 {
        let times = self.log.user_category_times(u, c);
        self.params.mu(u, c) + self.params.beta(u) * excitation(times, t, self.hyper)
    }

    /// `λ_u(t) = Σ_c λ_u(t, c)`.
    pub fn user_intensity(&self, u: usize, t: f64) -> Result<f64> {
        (0..self.log.n_categories()).map(|c| self.intensity(u, c, t)).sum()
    }

    /// `∫_a^b λ_u(s, c) ds` in closed form.
    pub fn intensity_integral(&self, u: usize, c: usize, a: f64, b: f64) -> Result<f64> {
        self.check_ids(u, c)?;
        if !(a <= b) {
            return Err(Error::invalid(format!("integration bounds a={a} > b={b}")));
        }
        Ok(self.integral_unchecked(u, c, a, b))
    }

    pub(crate) fn integral_unchecked(&self, u: usize, c: usize, a: f64, b: f64) -> f64 {
        let times = self.log.user_category_times(u, c);
        self.params.mu(u, c) * (b - a)
            + self.params.beta(u) * excitation_integral(times, a, b, self.hyper)
    }

    /// `Σ_{u,c} ∫_a^b λ_u(s, c) ds`.
    pub fn total_integral(&self, a: f64, b: f64) -> Result<f64> {
        if !(a <= b) {
            return Err(Error::invalid(format!("integration bounds a={a} > b={b}")));
        }
        let mut total = 0.0;
        for u in 0..self.log.n_users() {
            for c in 0..self.log.n_categories() {
                total += self.integral_unchecked(u, c, a, b);
            }
        }
        Ok(total)
    }
}

/// Temporal log-likelihood of `events` over the window `(a, b]`:
/// `Σ_i log λ_{u_i}(t_i, c_i) − Σ_{u,c} ∫_a^b λ_u(s, c) ds`.
///
/// History comes from `ctx.log`, which should contain everything observed
/// before each event. Returns `-inf` when some event has zero intensity.
pub fn temporal_loglik(ctx: &IntensityContext<'_>, events: &[Checkin], window: (f64, f64)) -> f64 {
    let (a, b) = window;
    let mut ll = 0.0;
    for e in events {
        let lambda = ctx.intensity_unchecked(e.user, e.category, e.t);
        if lambda <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += lambda.ln();
    }
    ll - ctx.total_integral(a, b).unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LocationLayout;
    use approx::assert_relative_eq;

    fn hyper(mode: KernelMode) -> HyperParams {
        HyperParams {
            kernel_mode: mode,
            ..HyperParams::default()
        }
    }

    fn single_event_ctx_parts(mu: f64, beta: f64, events: &[f64], horizon: f64) -> (EventLog, ModelParams) {
        let layout = LocationLayout::uniform(1, 1);
        let evs = events.iter().map(|&t| Checkin::new(t, 0, 0, 0)).collect();
        let log = EventLog::new(1, layout, evs, horizon).unwrap();
        let params =
            ModelParams::from_parts(1, 1, vec![mu], vec![beta], vec![0.0], vec![1.0]).unwrap();
        (log, params)
    }

    // Midpoint rule: never evaluates at the jump points of the truncated kernel.
    fn midpoint(f: impl Fn(f64) -> f64, a: f64, b: f64, step: f64) -> f64 {
        let n = (((b - a) / step).ceil() as usize).max(1);
        let h = (b - a) / n as f64;
        (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn kernel_values() {
        let h = HyperParams::default();
        assert_eq!(kernel(0.0, &h), 1.0);
        assert_eq!(kernel(12.0, &h), 0.0);
        assert_relative_eq!(kernel(0.5, &h), (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(kernel(0.5, &h), 0.60653, epsilon = 1e-5);
        // inclusive boundary
        assert!(kernel(6.0, &h) > 0.0);
        assert_eq!(kernel(6.0 + 1e-12, &h), 0.0);
    }

    #[test]
    fn intensity_empty_history_is_base_rate() {
        let (log, params) = single_event_ctx_parts(0.3, 1.0, &[], 100.0);
        let h = HyperParams::default();
        let ctx = IntensityContext::new(&log, &params, &h).unwrap();
        assert_eq!(ctx.intensity(0, 0, 40.0).unwrap(), 0.3);
    }

    #[test]
    fn intensity_one_period_later() {
        for mode in [KernelMode::PaperFloor, KernelMode::NearestPeriod] {
            let (log, params) = single_event_ctx_parts(0.0, 1.0, &[0.0], 100.0);
            let h = hyper(mode);
            let ctx = IntensityContext::new(&log, &params, &h).unwrap();
            assert_relative_eq!(ctx.intensity(0, 0, 12.0).unwrap(), (-1.0f64).exp(), max_relative = 1e-14);
            assert_relative_eq!(ctx.intensity(0, 0, 12.0).unwrap(), 0.36788, epsilon = 1e-5);
            // half a period in: nothing in PaperFloor, a vanishing tail in NearestPeriod
            assert!(ctx.intensity(0, 0, 6.01).unwrap() < 1e-30);
            // same-period self-excitation is excluded
            assert_eq!(ctx.intensity(0, 0, 0.3).unwrap(), 0.0);
        }
    }

    #[test]
    fn paper_floor_drops_the_leading_half_bump() {
        let (log, params) = single_event_ctx_parts(0.0, 1.0, &[0.0], 100.0);
        let floor = hyper(KernelMode::PaperFloor);
        let nearest = hyper(KernelMode::NearestPeriod);
        let a = IntensityContext::new(&log, &params, &floor).unwrap();
        let b = IntensityContext::new(&log, &params, &nearest).unwrap();
        assert_eq!(a.intensity(0, 0, 23.8).unwrap(), 0.0);
        let want = (-0.04f64 / 0.5).exp() * (-2.0f64).exp();
        assert_relative_eq!(b.intensity(0, 0, 23.8).unwrap(), want, max_relative = 1e-12);
        assert_relative_eq!(a.intensity(0, 0, 24.2).unwrap(), want, max_relative = 1e-12);
    }

    #[test]
    fn max_periods_truncates() {
        let (log, params) = single_event_ctx_parts(0.0, 1.0, &[0.0], 1000.0);
        let h = HyperParams {
            max_periods: 3,
            ..HyperParams::default()
        };
        let ctx = IntensityContext::new(&log, &params, &h).unwrap();
        assert!(ctx.intensity(0, 0, 36.0).unwrap() > 0.0);
        assert_eq!(ctx.intensity(0, 0, 48.0).unwrap(), 0.0);
    }

    #[test]
    fn integral_constant_rate() {
        let (log, params) = single_event_ctx_parts(0.05, 1.0, &[], 100.0);
        let h = HyperParams::default();
        let ctx = IntensityContext::new(&log, &params, &h).unwrap();
        assert_relative_eq!(ctx.intensity_integral(0, 0, 0.0, 10.0).unwrap(), 0.5, max_relative = 1e-15);
        assert_eq!(ctx.intensity_integral(0, 0, 3.0, 3.0).unwrap(), 0.0);
        assert!(ctx.intensity_integral(0, 0, 3.0, 2.0).is_err());
    }

    #[test]
    fn integral_matches_quadrature_after_one_event() {
        // Frozen from an independent high-precision quadrature:
        //   PaperFloor:    e^-1 σ√(π/2)             = 0.230 534 252 2
        //   NearestPeriod: e^-1 σ√(2π) + e^-2 σ√(π/2) = 0.545 877 316 3
        let frozen = [
            (KernelMode::PaperFloor, 0.230_534_252_224),
            (KernelMode::NearestPeriod, 0.545_877_316_327),
        ];
        for (mode, want) in frozen {
            let (log, params) = single_event_ctx_parts(0.0, 1.0, &[0.0], 100.0);
            let h = hyper(mode);
            let ctx = IntensityContext::new(&log, &params, &h).unwrap();
            let got = ctx.intensity_integral(0, 0, 0.0, 24.0).unwrap();
            let oracle = midpoint(|t| ctx.intensity(0, 0, t).unwrap(), 0.0, 24.0, 1e-4);
            assert_relative_eq!(got, oracle, max_relative = 1e-6);
            assert_relative_eq!(got, want, max_relative = 1e-9);
        }
    }

    #[test]
    fn temporal_loglik_examples() {
        let h = HyperParams::default();
        let (log, params) = single_event_ctx_parts(0.1, 0.0, &[], 10.0);
        let ctx = IntensityContext::new(&log, &params, &h).unwrap();
        assert_relative_eq!(temporal_loglik(&ctx, &[], (0.0, 10.0)), -1.0, max_relative = 1e-14);

        let (log, params) = single_event_ctx_parts(0.1, 0.0, &[5.0], 10.0);
        let ctx = IntensityContext::new(&log, &params, &h).unwrap();
        let ll = temporal_loglik(&ctx, log.events(), (0.0, 10.0));
        assert_relative_eq!(ll, 0.1f64.ln() - 1.0, max_relative = 1e-14);
        assert_relative_eq!(ll, -3.3026, epsilon = 1e-4);

        let (log, params) = single_event_ctx_parts(0.0, 1.0, &[5.0], 10.0);
        let ctx = IntensityContext::new(&log, &params, &h).unwrap();
        assert_eq!(temporal_loglik(&ctx, log.events(), (0.0, 10.0)), f64::NEG_INFINITY);
    }

    #[test]
    fn gaussian_mass_tails_are_accurate() {
        let s = 0.5;
        let full = gaussian_mass(-50.0, 50.0, s);
        assert_relative_eq!(full, s * (2.0 * PI).sqrt(), max_relative = 1e-14);
        // deep tail: erf differences would cancel to zero here
        let tail = gaussian_mass(5.0, 6.0, s);
        assert!(tail > 0.0 && tail < 1e-20);
        assert_relative_eq!(gaussian_mass(-6.0, -5.0, s), tail, max_relative = 1e-12);
    }
}
