use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::magp::{kernel, MaGPModel, Posterior, Solver};
use crate::qscore::{Bounds, QSPoint};

/// Fixed-hyperparameter GP state whose covariance inverse grows by one
/// row and column per observation.
#[derive(Clone, Debug)]
pub struct FastState {
    post: Posterior,
    bounds: Bounds,
    t: usize,
}

/// Relative floor on the Schur complement below which an update is refused.
pub const SM_TOLERANCE: f64 = 1e-10;

impl FastState {
    pub fn from_model(model: &MaGPModel) -> Self {
        let mut post = model.posterior().clone();
        let inv = match &post.solver {
            Solver::Chol(c) => c.inverse(),
            Solver::Inv(m) => m.clone(),
        };
        post.solver = Solver::Inv(inv);
        FastState { post, bounds: model.bounds().clone(), t: model.t() }
    }

    pub fn posterior(&self) -> &Posterior {
        &self.post
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        match &self.post.solver {
            Solver::Inv(m) => m,
            Solver::Chol(_) => unreachable!("fast state always holds an explicit inverse"),
        }
    }

    pub fn n(&self) -> usize {
        self.post.n()
    }

    /// Model view for prediction and snapshots.
    pub fn model(&self) -> MaGPModel {
        MaGPModel::from_posterior(self.post.clone(), self.bounds.clone(), self.t, f64::NAN)
    }
}

/// Appends one observation (unit-scale x) with the block inverse
/// [[A + g g^T v, g], [g^T, 1/v]], g = -A gamma / v, in O(n^2).
pub fn sm_update(mut state: FastState, w: QSPoint, y: f64) -> Result<FastState> {
    if !y.is_finite() {
        return Err(Error::Invalid("non-finite response".into()));
    }
    if w.k() != state.post.k() {
        return Err(Error::Invalid("point dimension does not match the model".into()));
    }
    let post = &state.post;
    let n = post.n();
    let gamma = DVector::from_iterator(n, post.points.iter().map(|p| kernel(&w, p, &post.params, &post.lat)));
    let diag = post.params.total_variance() + post.params.tau2 + post.jitter;
    let inv = match &post.solver {
        Solver::Inv(m) => m,
        Solver::Chol(_) => unreachable!("fast state always holds an explicit inverse"),
    };
    let u = inv * &gamma;
    let v = diag - gamma.dot(&u);
    if !(v > SM_TOLERANCE * diag) {
        return Err(Error::SingularUpdate(v));
    }
    let g = &u * (-1.0 / v);
    let mut next = DMatrix::zeros(n + 1, n + 1);
    next.view_mut((0, 0), (n, n)).copy_from(&(inv + &g * g.transpose() * v));
    for i in 0..n {
        next[(i, n)] = g[i];
        next[(n, i)] = g[i];
    }
    next[(n, n)] = 1.0 / v;

    let z = (y - state.post.center) / state.post.scale;
    state.post.solver = Solver::Inv(next);
    state.post.points.push(w);
    state.post.y.push(y);
    state.post.z.push(z);
    state.post.refresh();
    Ok(state)
}

/// ceil(n_left * t / t_left) clamped to [1, n_left].
pub fn fast_batch_size(n_left: usize, fit_seconds: f64, seconds_left: f64) -> usize {
    if n_left == 0 {
        return 0;
    }
    if !(seconds_left > 0.0) {
        return n_left;
    }
    let b = (n_left as f64 * fit_seconds.max(0.0) / seconds_left).ceil();
    if b.is_finite() {
        (b as usize).clamp(1, n_left)
    } else {
        n_left
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magp::{MaGPParams, MappingMatrix};
    use crate::qscore::random_perm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(k: usize, rng: &mut ChaCha8Rng, tau2: f64) -> MaGPParams {
        let t = 2.min(k - 1);
        let nf = MappingMatrix::free_count(k, t);
        MaGPParams {
            mu: 0.0,
            sigma2: (0..k).map(|_| rng.random_range(0.5..1.5)).collect(),
            theta: (0..k).map(|_| rng.random_range(2.0..10.0)).collect(),
            mapping: MappingMatrix::from_free(k, t, (0..nf).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap(),
            tau2,
        }
    }

    fn point(k: usize, rng: &mut ChaCha8Rng) -> QSPoint {
        QSPoint { x: (0..k).map(|_| rng.random()).collect(), o: random_perm(k, rng) }
    }

    fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn one_point_to_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = params(2, &mut rng, 0.0);
        let w1 = point(2, &mut rng);
        let w2 = point(2, &mut rng);
        let m = MaGPModel::from_params(vec![w1.clone()], vec![1.0], p.clone(), Bounds::unit(2), false, 0.0).unwrap();
        let s = sm_update(FastState::from_model(&m), w2.clone(), 2.0).unwrap();
        let a = p.total_variance();
        let b = crate::magp::covariance(&w1, &w2, &p);
        let det = a * a - b * b;
        let want = DMatrix::from_row_slice(2, 2, &[a / det, -b / det, -b / det, a / det]);
        assert!(rel_frob(s.inverse(), &want) < 1e-12);
    }

    #[test]
    fn matches_dense_inverse_up_to_100() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = 4;
        let p = params(k, &mut rng, 1e-2);
        let pts: Vec<QSPoint> = (0..100).map(|_| point(k, &mut rng)).collect();
        let y: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = MaGPModel::from_params(pts[..5].to_vec(), y[..5].to_vec(), p.clone(), Bounds::unit(k), false, 0.0).unwrap();
        let mut s = FastState::from_model(&m);
        for i in 5..100 {
            s = sm_update(s, pts[i].clone(), y[i]).unwrap();
            if [10, 50, 99].contains(&i) {
                let full = crate::magp::cov_matrix(&pts[..=i], &p, 0.0).unwrap();
                let dense = full.matrix.clone().try_inverse().unwrap();
                let e = rel_frob(s.inverse(), &dense);
                assert!(e < 1e-8, "n = {}: {e}", i + 1);
            }
        }
        // frozen-parameter predictions agree with a fresh factorization
        let fresh = MaGPModel::from_params(pts.clone(), y.clone(), p, Bounds::unit(k), false, 0.0).unwrap();
        let fast = s.model();
        for _ in 0..20 {
            let w = point(k, &mut rng);
            let (a, b) = (fast.predict(&w), fresh.predict(&w));
            assert!((a.mean - b.mean).abs() < 1e-6 && (a.sd - b.sd).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicate_is_refused() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = params(3, &mut rng, 0.0);
        let pts: Vec<QSPoint> = (0..4).map(|_| point(3, &mut rng)).collect();
        let m = MaGPModel::from_params(pts.clone(), vec![0.0, 1.0, 2.0, 3.0], p, Bounds::unit(3), false, 0.0).unwrap();
        let r = sm_update(FastState::from_model(&m), pts[2].clone(), 5.0);
        assert!(matches!(r, Err(Error::SingularUpdate(_))));
    }

    #[test]
    fn batch_sizes() {
        assert_eq!(fast_batch_size(50, 1e6, 1.0), 50);
        assert_eq!(fast_batch_size(50, 0.0, 100.0), 1);
        assert_eq!(fast_batch_size(50, 1.0, 10.0), 5);
        assert_eq!(fast_batch_size(50, 1.0, 0.0), 50);
        assert_eq!(fast_batch_size(0, 1.0, 10.0), 0);
    }
}
