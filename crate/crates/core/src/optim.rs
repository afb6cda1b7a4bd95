//! Numerical search helpers: a box-constrained L-BFGS and a generic
//! threshold-accepting driver.

use std::collections::VecDeque;

use rand::{Rng, RngCore};

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop when the projected gradient's max-norm falls below this.
    pub pgtol: f64,
    /// Stop when the relative decrease in f falls below this.
    pub ftol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { max_iter: 200, memory: 8, pgtol: 1e-6, ftol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64], extra: &dyn Fn(&mut [f64])) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
    extra(x);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected L-BFGS with Armijo backtracking.
///
/// `f` returns `None` where the objective cannot be evaluated; such points
/// are treated as infinitely bad by the line search. `extra` runs after the
/// box projection and may enforce additional (possibly non-convex) feasibility.
pub fn minimize_box<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &LbfgsOptions,
    extra: &dyn Fn(&mut [f64]),
) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper, extra);
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return None;
    }
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = false;

    let active = |x: &[f64], g: &[f64], i: usize| {
        (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)
    };

    while iterations < opts.max_iter {
        iterations += 1;
        let pg = (0..n)
            .map(|i| (x[i] - (x[i] - g[i]).clamp(lower[i], upper[i])).abs())
            .fold(0.0, f64::max);
        if pg < opts.pgtol {
            converged = true;
            break;
        }

        let mut d = vec![0.0; n];
        let mut accepted = false;
        for attempt in 0..2 {
            let free: Vec<bool> = (0..n).map(|i| !active(&x, &g, i)).collect();
            let mut q: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
            if attempt == 0 && !mem.is_empty() {
                let mut alphas = Vec::with_capacity(mem.len());
                for (s, y, rho) in mem.iter().rev() {
                    let a = rho * dot(s, &q);
                    for i in 0..n {
                        q[i] -= a * y[i];
                    }
                    alphas.push(a);
                }
                let (s, y, _) = mem.back().unwrap();
                let gamma = dot(s, y) / dot(y, y);
                for v in q.iter_mut() {
                    *v *= gamma;
                }
                for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
                    let b = rho * dot(y, &q);
                    for i in 0..n {
                        q[i] += (a - b) * s[i];
                    }
                }
            } else if attempt == 0 || mem.is_empty() {
                let gn = dot(&q, &q).sqrt().max(1e-300);
                let scale = if iterations == 1 { 1.0_f64.min(1.0 / gn) } else { 1.0 };
                for v in q.iter_mut() {
                    *v *= scale;
                }
            }
            for i in 0..n {
                d[i] = if free[i] { -q[i] } else { 0.0 };
            }
            if dot(&d, &g) >= 0.0 {
                mem.clear();
                continue;
            }

            let mut step = 1.0;
            for _ in 0..40 {
                let mut xn: Vec<f64> = (0..n).map(|i| x[i] + step * d[i]).collect();
                project(&mut xn, lower, upper, extra);
                let dx: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                if dx.iter().all(|v| *v == 0.0) {
                    break;
                }
                if let Some((fn_, gn)) = f(&xn) {
                    let decrease = dot(&g, &dx);
                    if fn_.is_finite() && fn_ <= fx + 1e-4 * decrease.min(0.0) {
                        let yv: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
                        let sy = dot(&dx, &yv);
                        if sy > 1e-12 * dot(&dx, &dx).sqrt() * dot(&yv, &yv).sqrt() && sy > 0.0 {
                            mem.push_back((dx, yv, 1.0 / sy));
                            if mem.len() > opts.memory {
                                mem.pop_front();
                            }
                        }
                        let rel = (fx - fn_).abs() / fx.abs().max(fn_.abs()).max(1.0);
                        x = xn;
                        fx = fn_;
                        g = gn;
                        accepted = true;
                        if rel < opts.ftol {
                            converged = true;
                        }
                        break;
                    }
                }
                step *= 0.5;
            }
            if accepted {
                break;
            }
            mem.clear();
        }
        if !accepted {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Some(Minimum { x, f: fx, grad: g, iterations, converged })
}

/// A search state for threshold accepting that mutates in place.
pub trait TaState: Clone {
    fn value(&self) -> f64;
    /// Applies a random neighbor move and returns the new value.
    fn perturb(&mut self, rng: &mut dyn RngCore) -> f64;
    /// Reverts the most recent `perturb`.
    fn undo(&mut self);
}

#[derive(Clone, Copy, Debug)]
pub struct TaSchedule {
    pub n_seq: usize,
    pub n_rounds: usize,
    pub n_steps: usize,
}

/// Decreasing thresholds from the empirical distribution of neighbor increments:
/// round r uses the lower quantile at 0.5(1 - r/n_rounds).
pub fn thresholds(mut deltas: Vec<f64>, n_rounds: usize) -> Vec<f64> {
    if deltas.is_empty() {
        return vec![0.0; n_rounds];
    }
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = deltas.len();
    (1..=n_rounds)
        .map(|r| {
            let q = 0.5 * (1.0 - r as f64 / n_rounds as f64);
            let idx = ((q * m as f64).ceil() as usize).clamp(1, m);
            deltas[idx - 1]
        })
        .collect()
}

pub fn threshold_accepting<S: TaState, R: Rng>(
    mut state: S,
    sched: TaSchedule,
    rng: &mut R,
) -> (S, f64) {
    let v0 = state.value();
    let mut deltas = Vec::with_capacity(sched.n_seq);
    for _ in 0..sched.n_seq {
        let v = state.perturb(rng);
        if v.is_finite() {
            deltas.push((v - v0).abs());
        }
        state.undo();
    }
    let taus = thresholds(deltas, sched.n_rounds);
    let mut cur = v0;
    let mut best = state.clone();
    let mut best_v = v0;
    for tau in taus {
        for _ in 0..sched.n_steps {
            let v = state.perturb(rng);
            if v - cur <= tau {
                cur = v;
                if v < best_v {
                    best_v = v;
                    best = state.clone();
                }
            } else {
                state.undo();
            }
        }
    }
    (best, best_v)
}
