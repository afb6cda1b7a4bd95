use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::kernel::{add_diag, build_phi, factor_with_ladder, kernel, LatentTable, MaGPParams};
use super::mapping::MappingMatrix;
use crate::error::{invalid, Error, Result};
use crate::qscore::{Bounds, QSPoint};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub sd: f64,
}

/// Prediction with gradients with respect to the unit-scale x.
#[derive(Clone, Debug)]
pub struct PredictionGrad {
    pub mean: f64,
    pub sd: f64,
    pub d_mean: Vec<f64>,
    /// `None` where the sd is zero.
    pub d_sd: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub(crate) enum Solver {
    Chol(Cholesky<f64, Dyn>),
    Inv(DMatrix<f64>),
}

impl Solver {
    fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Solver::Chol(c) => c.solve(v),
            Solver::Inv(m) => m * v,
        }
    }
}

/// Conditioned GP state shared by the exact model and the fast variant.
/// Internally works on standardized responses z = (y - center) / scale.
#[derive(Clone, Debug)]
pub struct Posterior {
    pub(crate) params: MaGPParams,
    pub(crate) lat: LatentTable,
    pub(crate) points: Vec<QSPoint>,
    pub(crate) y: Vec<f64>,
    pub(crate) z: Vec<f64>,
    pub(crate) center: f64,
    pub(crate) scale: f64,
    pub(crate) solver: Solver,
    /// Phi^-1 1
    pub(crate) a: DVector<f64>,
    /// 1^T Phi^-1 1
    pub(crate) c: f64,
    /// Phi^-1 (z - mu 1)
    pub(crate) r: DVector<f64>,
    pub(crate) jitter: f64,
}

impl Posterior {
    pub(crate) fn new(
        points: Vec<QSPoint>,
        y: Vec<f64>,
        center: f64,
        scale: f64,
        mut params: MaGPParams,
        solver: Solver,
        jitter: f64,
    ) -> Self {
        let lat = LatentTable::new(&params.mapping);
        let z: Vec<f64> = y.iter().map(|v| (v - center) / scale).collect();
        let n = points.len();
        let a = solver.solve(&DVector::from_element(n, 1.0));
        let b = solver.solve(&DVector::from_column_slice(&z));
        let c = a.sum();
        params.mu = b.sum() / c;
        let r = &b - &a * params.mu;
        Posterior { params, lat, points, y, z, center, scale, solver, a, c, r, jitter }
    }

    pub(crate) fn refresh(&mut self) {
        let n = self.points.len();
        self.a = self.solver.solve(&DVector::from_element(n, 1.0));
        let b = self.solver.solve(&DVector::from_column_slice(&self.z));
        self.c = self.a.sum();
        self.params.mu = b.sum() / self.c;
        self.r = &b - &self.a * self.params.mu;
    }

    pub fn k(&self) -> usize {
        self.params.k()
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[QSPoint] {
        &self.points
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    /// Hyperparameters on the standardized response scale.
    pub fn params(&self) -> &MaGPParams {
        &self.params
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// GLS estimate of the mean on the original response scale.
    pub fn mu_hat(&self) -> f64 {
        self.center + self.scale * self.params.mu
    }

    pub(crate) fn gamma(&self, w: &QSPoint) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.points.iter().map(|p| kernel(w, p, &self.params, &self.lat)))
    }

    fn prior_var(&self) -> f64 {
        self.params.total_variance() + self.params.tau2
    }

    pub fn predict(&self, w: &QSPoint) -> Prediction {
        let g = self.gamma(w);
        let u = self.solver.solve(&g);
        let mean_z = self.params.mu + g.dot(&self.r);
        let one_minus = 1.0 - self.a.dot(&g);
        let var_z = self.prior_var() - g.dot(&u) + one_minus * one_minus / self.c;
        Prediction { mean: self.center + self.scale * mean_z, sd: self.scale * var_z.max(0.0).sqrt() }
    }

    pub fn predict_grad(&self, w: &QSPoint) -> PredictionGrad {
        let n = self.n();
        let k = self.k();
        let mut g = DVector::zeros(n);
        // J[i,h] = d gamma_i / d x_h
        let mut jac = DMatrix::zeros(n, k);
        for (i, p) in self.points.iter().enumerate() {
            let mut s = 0.0;
            for h in 0..k {
                let dx = w.x[h] - p.x[h];
                let kh = self.params.sigma2[h]
                    * (-self.params.theta[h] * dx * dx - self.lat.d2(w.o[h], p.o[h])).exp();
                s += kh;
                jac[(i, h)] = -2.0 * self.params.theta[h] * dx * kh;
            }
            g[i] = s;
        }
        let u = self.solver.solve(&g);
        let mean_z = self.params.mu + g.dot(&self.r);
        let one_minus = 1.0 - self.a.dot(&g);
        let var_z = self.prior_var() - g.dot(&u) + one_minus * one_minus / self.c;
        let jt = jac.transpose();
        let d_mean_z = &jt * &self.r;
        let d_mean = d_mean_z.iter().map(|v| v * self.scale).collect();
        let d_sd = if var_z > 1e-14 {
            let s_z = var_z.sqrt();
            let d_var = (&jt * &u) * -2.0 - (&jt * &self.a) * (2.0 * one_minus / self.c);
            Some(d_var.iter().map(|v| self.scale * v / (2.0 * s_z)).collect())
        } else {
            None
        };
        PredictionGrad {
            mean: self.center + self.scale * mean_z,
            sd: self.scale * var_z.max(0.0).sqrt(),
            d_mean,
            d_sd,
        }
    }
}

/// Fitted mapping-based additive GP.
#[derive(Clone, Debug)]
pub struct MaGPModel {
    post: Posterior,
    bounds: Bounds,
    t: usize,
    pub(crate) nll: f64,
}

/// Mean and scale used to standardize responses.
pub fn standardization(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    if y.len() < 2 {
        return (mean, 1.0);
    }
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if sd > 1e-12 * mean.abs().max(1.0) {
        (mean, sd)
    } else {
        (mean, 1.0)
    }
}

impl MaGPModel {
    /// Conditions a model with given hyperparameters (standardized scale
    /// when `standardize`, otherwise raw); mu is replaced by its GLS estimate.
    pub fn from_params(
        points: Vec<QSPoint>,
        y: Vec<f64>,
        params: MaGPParams,
        bounds: Bounds,
        standardize: bool,
        base_jitter: f64,
    ) -> Result<Self> {
        params.validate()?;
        if points.is_empty() || points.len() != y.len() {
            return invalid("points and responses must be nonempty and equally long");
        }
        let (center, scale) = if standardize { standardization(&y) } else { (0.0, 1.0) };
        let lat = LatentTable::new(&params.mapping);
        let phi = build_phi(&points, &params, &lat);
        let (chol, _, jitter) = factor_with_ladder(phi, base_jitter)
            .ok_or_else(|| Error::IllConditioned("covariance not factorizable".into()))?;
        let t = params.mapping.t();
        let post = Posterior::new(points, y, center, scale, params, Solver::Chol(chol), jitter);
        Ok(MaGPModel { post, bounds, t, nll: f64::NAN })
    }

    pub(crate) fn from_posterior(post: Posterior, bounds: Bounds, t: usize, nll: f64) -> Self {
        MaGPModel { post, bounds, t, nll }
    }

    pub fn posterior(&self) -> &Posterior {
        &self.post
    }

    pub fn predict(&self, w: &QSPoint) -> Prediction {
        self.post.predict(w)
    }

    pub fn params(&self) -> &MaGPParams {
        &self.post.params
    }

    pub fn mu_hat(&self) -> f64 {
        self.post.mu_hat()
    }

    pub fn jitter(&self) -> f64 {
        self.post.jitter
    }

    pub fn nll(&self) -> f64 {
        self.nll
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn k(&self) -> usize {
        self.post.k()
    }

    /// Latent coordinates of order positions 1..k.
    pub fn latent_coordinates(&self) -> Vec<Vec<f64>> {
        self.post.params.mapping.rows()
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        let p = &self.post.params;
        ModelSnapshot {
            format: SNAPSHOT_FORMAT.into(),
            version: 1,
            k: self.k(),
            t: self.t,
            bounds: self.bounds.clone(),
            mu: p.mu,
            sigma2: p.sigma2.clone(),
            theta: p.theta.clone(),
            delta: p.mapping.free().to_vec(),
            tau2: p.tau2,
            jitter: self.post.jitter,
            center: self.post.center,
            scale: self.post.scale,
            nll: if self.nll.is_finite() { Some(self.nll) } else { None },
            training: self
                .post
                .points
                .iter()
                .zip(&self.post.y)
                .map(|(w, y)| TrainingRow { x_unit: w.x.clone(), o: w.o.clone(), y: *y })
                .collect(),
        }
    }

    pub fn from_snapshot(s: &ModelSnapshot) -> Result<Self> {
        if s.format != SNAPSHOT_FORMAT || s.version != 1 {
            return invalid(format!("unsupported model document {} v{}", s.format, s.version));
        }
        s.bounds.validate()?;
        let params = MaGPParams {
            mu: s.mu,
            sigma2: s.sigma2.clone(),
            theta: s.theta.clone(),
            mapping: MappingMatrix::from_free(s.k, s.t, s.delta.clone())?,
            tau2: s.tau2,
        };
        params.validate()?;
        let points = s
            .training
            .iter()
            .map(|r| QSPoint::new(r.x_unit.clone(), r.o.clone()))
            .collect::<Result<Vec<_>>>()?;
        if points.is_empty() || !(s.scale > 0.0) {
            return invalid("model document has no training rows or a bad scale");
        }
        let y = s.training.iter().map(|r| r.y).collect();
        let lat = LatentTable::new(&params.mapping);
        let m = add_diag(&build_phi(&points, &params, &lat), s.jitter);
        let chol = Cholesky::new(m).ok_or_else(|| Error::IllConditioned("stored model not factorizable".into()))?;
        let post = Posterior::new(points, y, s.center, s.scale, params, Solver::Chol(chol), s.jitter);
        Ok(MaGPModel { post, bounds: s.bounds.clone(), t: s.t, nll: s.nll.unwrap_or(f64::NAN) })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.snapshot())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_snapshot(&serde_json::from_str(text)?)
    }
}

pub fn predict(model: &MaGPModel, w: &QSPoint) -> Prediction {
    model.predict(w)
}

const SNAPSHOT_FORMAT: &str = "qsopt-magp";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub x_unit: Vec<f64>,
    pub o: Vec<usize>,
    pub y: f64,
}

/// Self-describing model document. Hyperparameters live on the
/// standardized scale given by `center` and `scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSnapshot {
    pub format: String,
    pub version: u32,
    pub k: usize,
    pub t: usize,
    pub bounds: Bounds,
    pub mu: f64,
    pub sigma2: Vec<f64>,
    pub theta: Vec<f64>,
    pub delta: Vec<f64>,
    pub tau2: f64,
    pub jitter: f64,
    pub center: f64,
    pub scale: f64,
    pub nll: Option<f64>,
    pub training: Vec<TrainingRow>,
}

#[cfg(test)]
mod tests {
    use super::super::kernel::tests::{random_params, random_points};
    use super::super::kernel::covariance;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = random_points(6, 3, &mut rng);
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = random_params(3, 2, 0.01, &mut rng);
        let m = MaGPModel::from_params(pts.clone(), y.clone(), p.clone(), Bounds::unit(3), false, 0.0).unwrap();
        let phi = DMatrix::from_fn(6, 6, |i, j| {
            covariance(&pts[i], &pts[j], &MaGPParams { tau2: 0.0, ..p.clone() }) + if i == j { p.tau2 } else { 0.0 }
        });
        let lu = phi.lu();
        let ones = DVector::from_element(6, 1.0);
        let yv = DVector::from_column_slice(&y);
        let ai = lu.solve(&ones).unwrap();
        let mu = ones.dot(&lu.solve(&yv).unwrap()) / ones.dot(&ai);
        let ri = lu.solve(&(yv - &ones * mu)).unwrap();
        for _ in 0..5 {
            let w = random_points(1, 3, &mut rng).pop().unwrap();
            let g = DVector::from_iterator(6, pts.iter().map(|p2| {
                covariance(&w, p2, &MaGPParams { tau2: 0.0, ..p.clone() })
            }));
            let mean = mu + g.dot(&ri);
            let c = ones.dot(&ai);
            let var = p.sigma2.iter().sum::<f64>() + p.tau2 - g.dot(&lu.solve(&g).unwrap())
                + (1.0 - ai.dot(&g)).powi(2) / c;
            let pr = m.predict(&w);
            assert!((pr.mean - mean).abs() < 1e-8);
            assert!((pr.sd * pr.sd - var).abs() < 1e-8);
        }
    }

    #[test]
    fn far_point_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = random_points(5, 2, &mut rng);
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = random_params(2, 1, 0.0, &mut rng);
        let m = MaGPModel::from_params(pts, y, p.clone(), Bounds::unit(2), false, 0.0).unwrap();
        let far = QSPoint::new(vec![1e4, 1e4], vec![1, 2]).unwrap();
        let pr = m.predict(&far);
        assert!((pr.mean - m.mu_hat()).abs() < 1e-12);
        let expect = p.sigma2.iter().sum::<f64>() + 1.0 / m.posterior().c;
        assert!((pr.sd * pr.sd - expect).abs() < 1e-10);
    }

    #[test]
    fn interpolates_without_nugget() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let pts = random_points(12, 4, &mut rng);
        let y: Vec<f64> = (0..12).map(|_| rng.random_range(10.0..20.0)).collect();
        let p = random_params(4, 2, 0.0, &mut rng);
        let m = MaGPModel::from_params(pts.clone(), y.clone(), p, Bounds::unit(4), true, 0.0).unwrap();
        for (w, yi) in pts.iter().zip(&y) {
            let pr = m.predict(w);
            assert!((pr.mean - yi).abs() <= 1e-6 * (1.0 + yi.abs()));
            assert!(pr.sd <= 1e-4);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts = random_points(8, 3, &mut rng);
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = random_params(3, 2, 0.0, &mut rng);
        let m = MaGPModel::from_params(pts, y, p, Bounds::unit(3), true, 0.0).unwrap();
        let w = QSPoint::new(vec![0.3, 0.6, 0.2], vec![2, 3, 1]).unwrap();
        let pg = m.posterior().predict_grad(&w);
        let ds = pg.d_sd.unwrap();
        for h in 0..3 {
            let mut up = w.clone();
            up.x[h] += 1e-6;
            let mut dn = w.clone();
            dn.x[h] -= 1e-6;
            let (pu, pd) = (m.predict(&up), m.predict(&dn));
            assert!(((pu.mean - pd.mean) / 2e-6 - pg.d_mean[h]).abs() < 1e-6);
            assert!(((pu.sd - pd.sd) / 2e-6 - ds[h]).abs() < 1e-6);
        }
    }

    #[test]
    fn snapshot_roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pts = random_points(7, 3, &mut rng);
        let y: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = random_params(3, 2, 0.0, &mut rng);
        let m = MaGPModel::from_params(pts.clone(), y, p, Bounds::uniform(3, 1.0, 4.0).unwrap(), true, 0.0).unwrap();
        let text = m.to_json().unwrap();
        let back = MaGPModel::from_json(&text).unwrap();
        assert_eq!(back.to_json().unwrap(), text);
        let w = &pts[3];
        assert_eq!(back.predict(w), m.predict(w));
        assert!(MaGPModel::from_json("{\"format\":\"x\"}").is_err());
    }
}
