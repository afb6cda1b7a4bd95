use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::MaGPParams;
use super::likelihood::nll_parts;
use super::mapping::{param_count, MappingMatrix};
use super::model::{standardization, MaGPModel};
use crate::error::{invalid, Error, Result};
use crate::optim::{minimize_box, LbfgsOptions};
use crate::qscore::{Bounds, QSPoint};

const LOG_MIN: f64 = -13.815510557964274; // ln 1e-6
const LOG_MAX: f64 = 13.815510557964274;
const DELTA_BOUND: f64 = 10.0;
const DELTA_MIN_ABS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tau2Policy {
    /// Fixed on the standardized response scale.
    Fixed(f64),
    Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub t: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tau2: Tau2Policy,
    /// Relative nugget always added to the diagonal (times its mean).
    pub jitter: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { t: 2, restarts: 8, max_iter: 200, tau2: Tau2Policy::Fixed(0.0), jitter: 0.0, seed: 0 }
    }
}

impl FitConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        param_count(k, self.t)?;
        if self.restarts == 0 {
            return invalid("restarts must be at least 1");
        }
        if !(self.jitter >= 0.0) {
            return invalid("jitter must be nonnegative");
        }
        if let Tau2Policy::Fixed(v) = self.tau2 {
            if !(v >= 0.0 && v.is_finite()) {
                return invalid("fixed tau2 must be nonnegative");
            }
        }
        Ok(())
    }
}

/// Layout of the optimizer's variable vector:
/// [ln sigma2 (k), ln theta (k), delta (free), ln tau2 (if estimated)].
struct Layout {
    k: usize,
    t: usize,
    n_delta: usize,
    estimate_tau2: bool,
    fixed_tau2: f64,
    guarded: Vec<usize>,
}

impl Layout {
    fn len(&self) -> usize {
        2 * self.k + self.n_delta + usize::from(self.estimate_tau2)
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![LOG_MIN; 2 * self.k];
        let mut hi = vec![LOG_MAX; 2 * self.k];
        lo.extend(std::iter::repeat_n(-DELTA_BOUND, self.n_delta));
        hi.extend(std::iter::repeat_n(DELTA_BOUND, self.n_delta));
        if self.estimate_tau2 {
            lo.push(LOG_MIN);
            hi.push(LOG_MAX);
        }
        (lo, hi)
    }

    fn params(&self, v: &[f64]) -> MaGPParams {
        let k = self.k;
        let d0 = 2 * k;
        MaGPParams {
            mu: 0.0,
            sigma2: v[..k].iter().map(|s| s.exp()).collect(),
            theta: v[k..d0].iter().map(|s| s.exp()).collect(),
            mapping: MappingMatrix::from_free(k, self.t, v[d0..d0 + self.n_delta].to_vec())
                .expect("layout matches mapping"),
            tau2: if self.estimate_tau2 { v[d0 + self.n_delta].exp() } else { self.fixed_tau2 },
        }
    }

    fn guard(&self, v: &mut [f64]) {
        let d0 = 2 * self.k;
        for &i in &self.guarded {
            let x = &mut v[d0 + i];
            if x.abs() < DELTA_MIN_ABS {
                *x = if *x < 0.0 { -DELTA_MIN_ABS } else { DELTA_MIN_ABS };
            }
        }
    }
}

fn needs_guard(points: &[QSPoint], tau2: Tau2Policy) -> bool {
    if tau2 != Tau2Policy::Fixed(0.0) {
        return false;
    }
    for i in 0..points.len() {
        for j in 0..i {
            if points[i].x == points[j].x && points[i].o != points[j].o {
                return true;
            }
        }
    }
    false
}

#[derive(Clone, Debug)]
struct RestartResult {
    value: f64,
    v: Vec<f64>,
}

/// Multi-restart maximum likelihood fit of the MaGP model.
///
/// Responses are standardized; positive parameters are searched on the log
/// scale. The best restart (lowest profile nll, ties to the lowest index) wins.
pub fn fit(points: &[QSPoint], y: &[f64], bounds: &Bounds, config: &FitConfig) -> Result<MaGPModel> {
    let n = points.len();
    if n < 2 || n != y.len() {
        return invalid("fit needs at least two points with matching responses");
    }
    let k = points[0].k();
    if points.iter().any(|w| w.k() != k) || bounds.k() != k {
        return invalid("inconsistent dimensions");
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("responses must be finite");
    }
    config.validate(k)?;
    let (center, scale) = standardization(y);
    let z: Vec<f64> = y.iter().map(|v| (v - center) / scale).collect();

    let probe = MappingMatrix::zeros(k, config.t)?;
    let guarded = if needs_guard(points, config.tau2) {
        (2..=k.min(config.t + 1)).filter_map(|l| probe.free_index(l, l - 1)).collect()
    } else {
        vec![]
    };
    let layout = Layout {
        k,
        t: config.t,
        n_delta: probe.free().len(),
        estimate_tau2: config.tau2 == Tau2Policy::Estimate,
        fixed_tau2: match config.tau2 {
            Tau2Policy::Fixed(v) => v,
            Tau2Policy::Estimate => 0.0,
        },
        guarded,
    };
    let (lo, hi) = layout.bounds();
    let var_z = {
        let m = z.iter().sum::<f64>() / n as f64;
        (z.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).max(1e-12)
    };
    let opts = LbfgsOptions { max_iter: config.max_iter, ..Default::default() };

    let run = |r: usize| -> Option<RestartResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(r as u64);
        let mut v0 = Vec::with_capacity(layout.len());
        for _ in 0..k {
            v0.push((rng.random_range(0.1..2.0) * var_z / k as f64).ln());
        }
        for _ in 0..k {
            v0.push(rng.random_range(0.1f64.ln()..10f64.ln()));
        }
        for _ in 0..layout.n_delta {
            v0.push(rng.random_range(-2.0..2.0));
        }
        if layout.estimate_tau2 {
            v0.push(rng.random_range(1e-4f64.ln()..1e-1f64.ln()) + var_z.ln());
        }
        layout.guard(&mut v0);
        let objective = |v: &[f64]| -> Option<(f64, Vec<f64>)> {
            let p = layout.params(v);
            let parts = nll_parts(points, &z, &p, config.jitter, true).ok()?;
            let g = parts.gradient?;
            let mut grad = Vec::with_capacity(v.len());
            grad.extend(g.sigma2.iter().zip(&p.sigma2).map(|(a, b)| a * b));
            grad.extend(g.theta.iter().zip(&p.theta).map(|(a, b)| a * b));
            grad.extend(&g.delta);
            if layout.estimate_tau2 {
                grad.push(g.tau2 * p.tau2);
            }
            Some((parts.value, grad))
        };
        let m = minimize_box(objective, &v0, &lo, &hi, &opts, &|v| layout.guard(v))?;
        Some(RestartResult { value: m.f, v: m.x })
    };

    let results: Vec<Option<RestartResult>> = (0..config.restarts).into_par_iter().map(run).collect();
    let mut best: Option<&RestartResult> = None;
    for r in results.iter().flatten() {
        if best.is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    let best = best.ok_or_else(|| Error::Fit("no restart produced a factorizable covariance".into()))?;
    let params = layout.params(&best.v);
    let mut model = MaGPModel::from_params(points.to_vec(), y.to_vec(), params, bounds.clone(), true, config.jitter)?;
    model.nll = best.value;
    Ok(model)
}

/// Free parameters a fit with this configuration estimates (mu included).
pub fn free_parameters(k: usize, config: &FitConfig) -> Result<usize> {
    Ok(param_count(k, config.t)? + usize::from(config.tau2 == Tau2Policy::Estimate))
}
