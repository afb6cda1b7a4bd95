use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use super::mapping::MappingMatrix;
use crate::error::{invalid, Error, Result};
use crate::qscore::QSPoint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaGPParams {
    pub mu: f64,
    pub sigma2: Vec<f64>,
    pub theta: Vec<f64>,
    pub mapping: MappingMatrix,
    pub tau2: f64,
}

impl MaGPParams {
    pub fn k(&self) -> usize {
        self.sigma2.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.mapping.k();
        if self.sigma2.len() != k || self.theta.len() != k {
            return invalid("sigma2/theta length must equal k");
        }
        if self.sigma2.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return invalid("sigma2 must be positive");
        }
        if self.theta.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return invalid("theta must be positive");
        }
        if !(self.tau2 >= 0.0 && self.tau2.is_finite()) {
            return invalid("tau2 must be nonnegative");
        }
        Ok(())
    }

    pub fn total_variance(&self) -> f64 {
        self.sigma2.iter().sum::<f64>()
    }
}

/// Squared latent distances between all order levels.
#[derive(Clone, Debug)]
pub(crate) struct LatentTable {
    k: usize,
    pub rows: Vec<Vec<f64>>,
    d2: Vec<f64>,
}

impl LatentTable {
    pub fn new(mapping: &MappingMatrix) -> Self {
        let k = mapping.k();
        let rows = mapping.rows();
        let mut d2 = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                d2[a * k + b] = rows[a].iter().zip(&rows[b]).map(|(u, v)| (u - v) * (u - v)).sum();
            }
        }
        LatentTable { k, rows, d2 }
    }

    /// Squared latent distance between 1-based order levels.
    #[inline]
    pub fn d2(&self, a: usize, b: usize) -> f64 {
        self.d2[(a - 1) * self.k + (b - 1)]
    }
}

/// Per-component distance sqrt(theta_h dx^2 + latent distance^2), h 1-based.
pub fn component_distance(
    wi: &QSPoint,
    wj: &QSPoint,
    h: usize,
    theta_h: f64,
    mapping: &MappingMatrix,
) -> Result<f64> {
    if theta_h < 0.0 {
        return invalid("theta_h must be nonnegative");
    }
    if h < 1 || h > wi.k() || wi.k() != wj.k() || wi.k() != mapping.k() {
        return invalid("component index or dimensions out of range");
    }
    let dx = wi.x[h - 1] - wj.x[h - 1];
    let a = mapping.row(wi.o[h - 1]);
    let b = mapping.row(wj.o[h - 1]);
    let lat: f64 = a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum();
    Ok((theta_h * dx * dx + lat).sqrt())
}

/// Noise-free covariance between two points.
#[inline]
pub(crate) fn kernel(wi: &QSPoint, wj: &QSPoint, p: &MaGPParams, lat: &LatentTable) -> f64 {
    let mut s = 0.0;
    for h in 0..wi.x.len() {
        let dx = wi.x[h] - wj.x[h];
        s += p.sigma2[h] * (-p.theta[h] * dx * dx - lat.d2(wi.o[h], wj.o[h])).exp();
    }
    s
}

/// Covariance of the MaGP model: additive Gaussian kernel plus tau2 when the
/// two points coincide.
pub fn covariance(wi: &QSPoint, wj: &QSPoint, params: &MaGPParams) -> f64 {
    let lat = LatentTable::new(&params.mapping);
    let same = wi == wj;
    kernel(wi, wj, params, &lat) + if same { params.tau2 } else { 0.0 }
}

/// Covariance matrix with tau2 on the diagonal.
pub(crate) fn build_phi(points: &[QSPoint], p: &MaGPParams, lat: &LatentTable) -> DMatrix<f64> {
    let n = points.len();
    let mut phi = DMatrix::zeros(n, n);
    for i in 0..n {
        phi[(i, i)] = p.total_variance() + p.tau2;
        for j in 0..i {
            let v = kernel(&points[i], &points[j], p, lat);
            phi[(i, j)] = v;
            phi[(j, i)] = v;
        }
    }
    phi
}

pub const JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Cholesky factor of the covariance matrix and the absolute jitter added.
#[derive(Clone, Debug)]
pub struct CovFactor {
    pub matrix: DMatrix<f64>,
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl CovFactor {
    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }
}

fn describe_duplicates(points: &[QSPoint]) -> String {
    let mut same = Vec::new();
    let mut same_x = Vec::new();
    for i in 0..points.len() {
        for j in 0..i {
            if points[i] == points[j] {
                same.push((j + 1, i + 1));
            } else if points[i].x == points[j].x {
                same_x.push((j + 1, i + 1));
            }
        }
    }
    if same.is_empty() && same_x.is_empty() {
        "no duplicated rows; covariance numerically singular".into()
    } else {
        format!("identical runs {same:?}; runs sharing x with different orders {same_x:?}")
    }
}

pub(crate) fn add_diag(phi: &DMatrix<f64>, jitter: f64) -> DMatrix<f64> {
    let mut m = phi.clone();
    if jitter != 0.0 {
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
    }
    m
}

/// Tries the plain matrix (plus the base nugget), then the jitter ladder.
/// Returns the factor, the factorized matrix and the absolute jitter used.
pub(crate) fn factor_with_ladder(
    phi: DMatrix<f64>,
    base_jitter: f64,
) -> Option<(Cholesky<f64, Dyn>, DMatrix<f64>, f64)> {
    let n = phi.nrows();
    let mean_diag = phi.diagonal().sum() / n as f64;
    let base = base_jitter * mean_diag;
    let steps = std::iter::once(base).chain(JITTER_LADDER.iter().map(|f| base + f * mean_diag));
    for jitter in steps {
        let m = add_diag(&phi, jitter);
        if let Some(c) = Cholesky::new(m.clone()) {
            return Some((c, m, jitter));
        }
    }
    None
}

/// Builds and factorizes the covariance matrix, escalating jitter on failure.
/// `base_jitter` is a relative nugget (times the mean diagonal) always applied.
pub fn cov_matrix(points: &[QSPoint], params: &MaGPParams, base_jitter: f64) -> Result<CovFactor> {
    params.validate()?;
    if points.is_empty() {
        return invalid("need at least one point");
    }
    if points.iter().any(|w| w.k() != params.k()) {
        return invalid("point dimension does not match parameters");
    }
    let lat = LatentTable::new(&params.mapping);
    let phi = build_phi(points, params, &lat);
    match factor_with_ladder(phi, base_jitter) {
        Some((chol, matrix, jitter)) => Ok(CovFactor { matrix, chol, jitter }),
        None => Err(Error::IllConditioned(describe_duplicates(points))),
    }
}
