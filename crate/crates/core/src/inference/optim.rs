//! Limited-memory quasi-Newton maximization under lower bounds.
//!
//! The search direction is the L-BFGS two-loop product restricted to the
//! variables not held at a bound; steps are projected back onto the box and
//! accepted by an Armijo test along the projected path.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    /// Stop once the projected gradient's max-norm falls below this.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub memory: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_iters: 200,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iters: usize,
    /// Gradient tolerance reached, or no ascent possible in floating point.
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64]) {
    for (xi, &li) in x.iter_mut().zip(lower) {
        if *xi < li {
            *xi = li;
        }
    }
}

/// Projected gradient of the *minimization* problem `−f`.
fn projected_grad_norm(x: &[f64], g: &[f64], lower: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower)
        .map(|((&xi, &gi), &li)| if xi <= li && gi > 0.0 { 0.0 } else { gi.abs() })
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximize `f` subject to `x ≥ lower`. `f` writes its gradient into the
/// second argument and returns the value; non-finite values are treated as
/// infeasible. The returned point is never worse than the (projected) start.
pub fn maximize<F>(mut f: F, x0: &[f64], lower: &[f64], cfg: &OptimConfig) -> OptimResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(lower.len(), n);
    let mut x = x0.to_vec();
    project(&mut x, lower);
    // work with F = −f, g = −∇f
    let mut g = vec![0.0; n];
    let mut fx = -f(&x, &mut g);
    g.iter_mut().for_each(|v| *v = -*v);
    if !fx.is_finite() || n == 0 {
        let value = -fx;
        return OptimResult { x, value, iters: 0, converged: n == 0 };
    }

    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut g_new = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut iters = 0;
    let mut converged = false;

    while iters < cfg.max_iters {
        if projected_grad_norm(&x, &g, lower) <= cfg.grad_tol {
            converged = true;
            break;
        }
        iters += 1;
        let active: Vec<bool> = (0..n).map(|i| x[i] <= lower[i] && g[i] > 0.0).collect();

        // two-loop recursion on the free variables
        let mut q: Vec<f64> = (0..n).map(|i| if active[i] { 0.0 } else { g[i] }).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        let gamma = match hist.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / g.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0),
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                q[i] += (a - b) * s[i];
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| if active[i] { 0.0 } else { -q[i] }).collect();
        if dot(&d, &g) >= 0.0 {
            hist.clear();
            let scale = 1.0 / g.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
            d = (0..n).map(|i| if active[i] { 0.0 } else { -g[i] * scale }).collect();
        }

        // backtracking along the projected path
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            project(&mut x_new, lower);
            let moved: f64 = (0..n).map(|i| g[i] * (x_new[i] - x[i])).sum();
            if moved >= 0.0 {
                step *= 0.5;
                continue;
            }
            let f_new = -f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * moved {
                g_new.iter_mut().for_each(|v| *v = -*v);
                let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
                    if hist.len() == cfg.memory {
                        hist.pop_front();
                    }
                    hist.push_back((s, y, 1.0 / sy));
                }
                let stalled = (fx - f_new) <= 1e-15 * fx.abs().max(1.0);
                std::mem::swap(&mut x, &mut x_new);
                std::mem::swap(&mut g, &mut g_new);
                fx = f_new;
                accepted = true;
                if stalled {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no ascent representable from here
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    OptimResult {
        x,
        value: -fx,
        iters,
        converged,
    }
}
