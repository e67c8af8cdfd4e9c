//! Per-user expected complete log-likelihood and its gradient.
//!
//! For user `u` with coordinates `θ_u = (μ_u·, β_u, α̃_·u, η̃_u·)`,
//! `α = exp(α̃)`, `η = exp(η̃)`:
//!
//! ```text
//! Q_u = −Σ_c (μ_c T + β Φ_c) + Σ_i ln(μ_{c_i} + β φ_i)
//!     + Σ_i [ Σ_v r_iv (α̃_v + ln S_iv) + r_i0 (η̃_{c_i} + ln G₀_i)
//!             − ln(e^{η̃_{c_i}} + Σ_v e^{α̃_v} A_iv) ]
//! ```
//!
//! where `Φ_c` is the compensator of the periodic bumps, `φ_i` the
//! excitation at event `i`, `S_iv` the decayed visits of `v` at the event's
//! location and `A_iv` the same summed over the category.

use crate::error::{Error, Result};
use crate::model::ModelParams;

use super::em::Responsibilities;
use super::features::TrainingData;

/// Index map of `θ_u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThetaLayout {
    pub n_categories: usize,
    pub n_support: usize,
}

impl ThetaLayout {
    pub fn dim(&self) -> usize {
        2 * self.n_categories + 1 + self.n_support
    }

    pub fn mu(&self, c: usize) -> usize {
        c
    }

    pub fn beta(&self) -> usize {
        self.n_categories
    }

    pub fn alpha(&self, slot: usize) -> usize {
        self.n_categories + 1 + slot
    }

    pub fn eta(&self, c: usize) -> usize {
        self.n_categories + 1 + self.n_support + c
    }
}

/// The M-step problem of one user.
#[derive(Debug, Clone, Copy)]
pub struct UserProblem<'a> {
    pub data: &'a TrainingData,
    pub resp: &'a Responsibilities,
    pub user: usize,
}

impl<'a> UserProblem<'a> {
    pub fn new(data: &'a TrainingData, resp: &'a Responsibilities, user: usize) -> Self {
        Self { data, resp, user }
    }

    pub fn layout(&self) -> ThetaLayout {
        ThetaLayout {
            n_categories: self.data.n_categories,
            n_support: self.data.support[self.user].len(),
        }
    }

    /// Read `θ_u` from full parameters. Zero `α`/`η` map to `−∞`.
    pub fn pack(&self, params: &ModelParams) -> Vec<f64> {
        let lay = self.layout();
        let u = self.user;
        let mut theta = vec![0.0; lay.dim()];
        for c in 0..lay.n_categories {
            theta[lay.mu(c)] = params.mu(u, c);
            theta[lay.eta(c)] = params.eta(u, c).ln();
        }
        theta[lay.beta()] = params.beta(u);
        for (k, &v) in self.data.support[u].iter().enumerate() {
            theta[lay.alpha(k)] = params.alpha(v, u).ln();
        }
        theta
    }

    /// Write `θ_u` back into full parameters.
    pub fn unpack(&self, theta: &[f64], params: &mut ModelParams) {
        let lay = self.layout();
        let u = self.user;
        for c in 0..lay.n_categories {
            params.set_mu(u, c, theta[lay.mu(c)]);
            params.set_eta(u, c, theta[lay.eta(c)].exp());
        }
        params.set_beta(u, theta[lay.beta()]);
        for (k, &v) in self.data.support[u].iter().enumerate() {
            params.set_alpha(v, u, theta[lay.alpha(k)].exp());
        }
    }

    /// Temporal part: depends on `(μ_u·, β_u)` only.
    pub fn temporal(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let lay = self.layout();
        let d = self.data;
        let u = self.user;
        let beta = theta[lay.beta()];
        let mut value = 0.0;
        for c in 0..lay.n_categories {
            let mu = theta[lay.mu(c)];
            let phi = d.compensator(u, c);
            value -= mu * d.horizon + beta * phi;
            grad[lay.mu(c)] -= d.horizon;
            grad[lay.beta()] -= phi;
        }
        for ev in &d.users[u] {
            let lambda = theta[lay.mu(ev.category)] + beta * ev.excitation;
            if !(lambda > 0.0) {
                return f64::NEG_INFINITY;
            }
            value += lambda.ln();
            grad[lay.mu(ev.category)] += 1.0 / lambda;
            grad[lay.beta()] += ev.excitation / lambda;
        }
        value
    }

    /// Spatial part: depends on `(α̃_·u, η̃_u·)` only.
    pub fn spatial(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let lay = self.layout();
        let u = self.user;
        let mut value = 0.0;
        let mut terms: Vec<f64> = Vec::new();
        for (ev, r) in self.data.users[u].iter().zip(self.resp.user(u)) {
            let eta_i = lay.eta(ev.category);
            for ((&(k, _), &ln_s), &(_, rv)) in ev.sources.iter().zip(&ev.ln_sources).zip(&r.influence) {
                if rv > 0.0 {
                    value += rv * (theta[lay.alpha(k)] + ln_s);
                    grad[lay.alpha(k)] += rv;
                }
            }
            if r.explore > 0.0 {
                value += r.explore * (theta[eta_i] + ev.g0.ln());
                grad[eta_i] += r.explore;
            }
            // ln(e^{η̃} + Σ e^{α̃ + ln A}) by log-sum-exp
            terms.clear();
            terms.push(theta[eta_i]);
            terms.extend(
                ev.exposures
                    .iter()
                    .zip(&ev.ln_exposures)
                    .map(|(&(k, _), &ln_a)| theta[lay.alpha(k)] + ln_a),
            );
            let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            terms.iter_mut().for_each(|x| *x = (*x - top).exp());
            let sum: f64 = terms.iter().sum();
            value -= top + sum.ln();
            grad[eta_i] -= terms[0] / sum;
            for (&(k, _), &x) in ev.exposures.iter().zip(&terms[1..]) {
                grad[lay.alpha(k)] -= x / sum;
            }
        }
        value
    }

    /// Objective value; the gradient is written into `grad`.
    pub fn value_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.temporal(theta, grad) + self.spatial(theta, grad)
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut grad = vec![0.0; theta.len()];
        self.value_grad(theta, &mut grad)
    }
}

/// `Q_u(θ_u)` and its gradient, failing on a non-finite value.
pub fn user_objective(
    data: &TrainingData,
    resp: &Responsibilities,
    u: usize,
    theta: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if u >= data.n_users {
        return Err(Error::invalid(format!("user {u} out of range")));
    }
    let problem = UserProblem::new(data, resp, u);
    if theta.len() != problem.layout().dim() {
        return Err(Error::invalid(format!(
            "θ_u has {} entries, expected {}",
            theta.len(),
            problem.layout().dim()
        )));
    }
    let mut grad = vec![0.0; theta.len()];
    let value = problem.value_grad(theta, &mut grad);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!(
            "objective of user {u} is {value} at θ = {theta:?}"
        )));
    }
    Ok((value, grad))
}
