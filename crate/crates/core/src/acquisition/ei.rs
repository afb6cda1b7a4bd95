use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::magp::Posterior;
use crate::qscore::QSPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Multiplier that turns responses into a minimization problem.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        }
    }

    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Minimize => a < b,
            Direction::Maximize => a > b,
        }
    }

    /// Index of the first best response.
    pub fn best_index(self, ys: &[f64]) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &v) in ys.iter().enumerate() {
            if best.is_none_or(|b| self.better(v, ys[b])) {
                best = Some(i);
            }
        }
        best
    }
}

pub(crate) fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub(crate) fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Closed-form EI for minimization with predictive mean `m` and sd `s`.
pub fn ei_closed_form(m: f64, s: f64, y_min: f64) -> f64 {
    let d = y_min - m;
    if !(s > 0.0) {
        return d.max(0.0);
    }
    let z = d / s;
    (d * norm_cdf(z) + s * norm_pdf(z)).max(0.0)
}

pub fn expected_improvement(post: &Posterior, w: &QSPoint, incumbent: f64, direction: Direction) -> f64 {
    let p = post.predict(w);
    let sg = direction.sign();
    ei_closed_form(sg * p.mean, p.sd, sg * incumbent)
}

/// EI and, where the predictive sd is positive, its gradient in unit-scale x.
pub(crate) fn ei_value_grad(
    post: &Posterior,
    w: &QSPoint,
    incumbent: f64,
    direction: Direction,
) -> (f64, Option<Vec<f64>>) {
    let pg = post.predict_grad(w);
    let sg = direction.sign();
    let (m, best) = (sg * pg.mean, sg * incumbent);
    let ei = ei_closed_form(m, pg.sd, best);
    let grad = match (&pg.d_sd, pg.sd > 0.0) {
        (Some(ds), true) => {
            let z = (best - m) / pg.sd;
            let (cdf, pdf) = (norm_cdf(z), norm_pdf(z));
            Some(pg.d_mean.iter().zip(ds).map(|(dm, ds)| -cdf * sg * dm + pdf * ds).collect())
        }
        _ => None,
    };
    (ei, grad)
}

/// Analytic gradient of EI with respect to the unit-scale quantities.
pub fn ei_gradient_x(post: &Posterior, w: &QSPoint, incumbent: f64, direction: Direction) -> Result<Vec<f64>> {
    ei_value_grad(post, w, incumbent, direction).1.ok_or(Error::GradientUndefined)
}
