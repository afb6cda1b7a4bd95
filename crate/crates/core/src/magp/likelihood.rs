use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kernel::{build_phi, factor_with_ladder, LatentTable, MaGPParams};
use crate::error::{invalid, Error, Result};
use crate::qscore::QSPoint;

/// Gradient of the profile negative log-likelihood. `delta` follows the
/// mapping's free-entry order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NllGradient {
    pub sigma2: Vec<f64>,
    pub theta: Vec<f64>,
    pub delta: Vec<f64>,
    pub tau2: f64,
}

pub(crate) struct NllParts {
    pub value: f64,
    pub mu_hat: f64,
    pub gradient: Option<NllGradient>,
}

fn check(points: &[QSPoint], y: &[f64], params: &MaGPParams) -> Result<()> {
    params.validate()?;
    if points.is_empty() || points.len() != y.len() {
        return invalid("points and responses must be nonempty and equally long");
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("responses must be finite");
    }
    Ok(())
}

pub(crate) fn nll_parts(
    points: &[QSPoint],
    y: &[f64],
    params: &MaGPParams,
    base_jitter: f64,
    want_grad: bool,
) -> Result<NllParts> {
    let n = points.len();
    let lat = LatentTable::new(&params.mapping);
    let phi = build_phi(points, params, &lat);
    let (chol, _, _) = factor_with_ladder(phi, base_jitter)
        .ok_or_else(|| Error::IllConditioned("covariance not factorizable".into()))?;
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let yv = DVector::from_column_slice(y);
    let ones = DVector::from_element(n, 1.0);
    let a = chol.solve(&ones);
    let b = chol.solve(&yv);
    let c = a.sum();
    let ob = b.sum();
    let mu_hat = ob / c;
    let value = log_det + yv.dot(&b) - ob * ob / c;
    if !value.is_finite() {
        return Err(Error::IllConditioned("non-finite likelihood".into()));
    }
    if !want_grad {
        return Ok(NllParts { value, mu_hat, gradient: None });
    }

    let r = &b - &a * mu_hat;
    let inv = chol.inverse();
    // d/dP of the nll = sum_ij W_ij dPhi_ij with W = Phi^-1 - r r^T
    let w: DMatrix<f64> = inv - &r * r.transpose();
    let k = params.k();
    let entries = params.mapping.free_entries();
    let t = params.mapping.t();
    // free index lookup for (level, axis), 1-based level
    let mut idx = vec![None; (k + 1) * (t + 1)];
    for (s, &(l, j)) in entries.iter().enumerate() {
        idx[l * (t + 1) + j] = Some(s);
    }
    let mut g = NllGradient {
        sigma2: vec![0.0; k],
        theta: vec![0.0; k],
        delta: vec![0.0; entries.len()],
        tau2: w.trace(),
    };
    for i in 0..n {
        for h in 0..k {
            g.sigma2[h] += w[(i, i)];
        }
        for j in 0..i {
            let wij = 2.0 * w[(i, j)];
            let (pi, pj) = (&points[i], &points[j]);
            for h in 0..k {
                let dx = pi.x[h] - pj.x[h];
                let (la, lb) = (pi.o[h], pj.o[h]);
                let kh = (-params.theta[h] * dx * dx - lat.d2(la, lb)).exp();
                g.sigma2[h] += wij * kh;
                let sk = params.sigma2[h] * kh;
                g.theta[h] -= wij * sk * dx * dx;
                if la != lb {
                    for m in 0..t {
                        let diff = lat.rows[la - 1][m] - lat.rows[lb - 1][m];
                        // dK/d delta(la, m) = -sk * 2 diff ; dK/d delta(lb, m) = +sk * 2 diff
                        if let Some(s) = idx[la * (t + 1) + m + 1] {
                            g.delta[s] -= wij * sk * 2.0 * diff;
                        }
                        if let Some(s) = idx[lb * (t + 1) + m + 1] {
                            g.delta[s] += wij * sk * 2.0 * diff;
                        }
                    }
                }
            }
        }
    }
    Ok(NllParts { value, mu_hat, gradient: Some(g) })
}

/// Profile negative log-likelihood (up to constants) and the GLS estimate of mu.
/// `params.mu` is ignored.
pub fn profile_nll(points: &[QSPoint], y: &[f64], params: &MaGPParams) -> Result<(f64, f64)> {
    check(points, y, params)?;
    let p = nll_parts(points, y, params, 0.0, false)?;
    Ok((p.value, p.mu_hat))
}

/// Analytic gradient of `profile_nll` over (sigma2, theta, delta, tau2).
pub fn nll_gradient(points: &[QSPoint], y: &[f64], params: &MaGPParams) -> Result<NllGradient> {
    check(points, y, params)?;
    Ok(nll_parts(points, y, params, 0.0, true)?.gradient.unwrap())
}
