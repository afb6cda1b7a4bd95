use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ei::{ei_value_grad, expected_improvement, Direction};
use super::sfta::{sfta, SftaConfig};
use crate::error::{invalid, Result};
use crate::initdesign::random_lhs;
use crate::magp::{Posterior, Prediction};
use crate::optim::{minimize_box, LbfgsOptions};
use crate::qscore::{all_perms, factorial, QSPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EgoConfig {
    /// Maximum alternation rounds between the x and o searches.
    pub n_round: usize,
    /// Enumerate all k! sequences when k! does not exceed this.
    pub enumerate_threshold: u64,
    /// Multi-start count for the continuous search.
    pub x_starts: usize,
    pub x_max_iter: usize,
    pub alpha: f64,
    pub seed: u64,
    pub sfta: SftaConfig,
    /// Quantities held fixed (unit scale); only orders are searched.
    pub fixed_x: Option<Vec<f64>>,
}

impl Default for EgoConfig {
    fn default() -> Self {
        EgoConfig {
            n_round: 10,
            enumerate_threshold: 120,
            x_starts: 20,
            x_max_iter: 100,
            alpha: 0.01,
            seed: 0,
            sfta: SftaConfig::default(),
            fixed_x: None,
        }
    }
}

impl EgoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_round == 0 || self.x_starts == 0 {
            return invalid("n_round and x_starts must be positive");
        }
        if !(0.001..=0.01).contains(&self.alpha) {
            return invalid("alpha must lie in [0.001, 0.01]");
        }
        if self.sfta.n_seq < 2 || self.sfta.n_rounds == 0 {
            return invalid("sfta needs n_seq >= 2 and n_rounds >= 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub point: QSPoint,
    pub ei: f64,
    pub prediction: Prediction,
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Best-observed x followed by space-filling random starts.
fn starts(post: &Posterior, direction: Direction, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let k = post.k();
    let mut out = Vec::with_capacity(n);
    if let Some(i) = direction.best_index(post.responses()) {
        out.push(post.points()[i].x.clone());
    }
    if n > out.len() {
        out.extend(random_lhs(n - out.len(), k, rng));
    }
    out.truncate(n);
    out
}

fn x_search(
    post: &Posterior,
    o: &[usize],
    incumbent: f64,
    direction: Direction,
    config: &EgoConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64) {
    if let Some(x) = &config.fixed_x {
        let w = QSPoint { x: x.clone(), o: o.to_vec() };
        return (x.clone(), expected_improvement(post, &w, incumbent, direction));
    }
    let k = post.k();
    let xs = starts(post, direction, config.x_starts, rng);
    let start_ei: Vec<f64> = xs
        .iter()
        .map(|x| expected_improvement(post, &QSPoint { x: x.clone(), o: o.to_vec() }, incumbent, direction))
        .collect();
    let scale = start_ei.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let opts = LbfgsOptions { max_iter: config.x_max_iter, pgtol: 1e-9, ftol: 1e-10, ..Default::default() };
    let (lo, hi) = (vec![0.0; k], vec![1.0; k]);
    let mut best = (xs[0].clone(), start_ei[0]);
    for (x0, e0) in xs.iter().zip(&start_ei) {
        if *e0 > best.1 {
            best = (x0.clone(), *e0);
        }
        let f = |x: &[f64]| {
            let w = QSPoint { x: x.to_vec(), o: o.to_vec() };
            let (ei, g) = ei_value_grad(post, &w, incumbent, direction);
            let g = g.unwrap_or_else(|| vec![0.0; k]);
            Some((-ei / scale, g.iter().map(|v| -v / scale).collect()))
        };
        if let Some(m) = minimize_box(f, x0, &lo, &hi, &opts, &|_| {}) {
            let ei = -m.f * scale;
            if ei > best.1 {
                best = (m.x, ei);
            }
        }
    }
    best
}

/// Multi-start projected gradient search for the x maximizing EI at order `o`.
pub fn optimize_x_given_o(
    post: &Posterior,
    o: &[usize],
    incumbent: f64,
    direction: Direction,
    config: &EgoConfig,
) -> (Vec<f64>, f64) {
    let mut rng = seeded(config.seed, 0);
    x_search(post, o, incumbent, direction, config, &mut rng)
}

fn inner_stop(trace: &[f64], alpha: f64) -> bool {
    let n = trace.len();
    n >= 3 && trace[n - 1] <= (1.0 + alpha) * trace[n - 3]
}

/// Next run maximizing EI over quantities and orders.
pub fn propose_next(post: &Posterior, incumbent: f64, direction: Direction, config: &EgoConfig) -> Proposal {
    let k = post.k();
    let finish = |x: Vec<f64>, o: Vec<usize>, ei: f64| {
        let point = QSPoint { x, o };
        let prediction = post.predict(&point);
        Proposal { point, ei, prediction }
    };

    if factorial(k) <= config.enumerate_threshold {
        let perms = all_perms(k);
        let results: Vec<(Vec<f64>, f64)> = perms
            .par_iter()
            .enumerate()
            .map(|(i, o)| {
                let mut rng = seeded(config.seed, i as u64);
                x_search(post, o, incumbent, direction, config, &mut rng)
            })
            .collect();
        let mut bi = 0;
        for (i, r) in results.iter().enumerate() {
            if r.1 > results[bi].1 {
                bi = i;
            }
        }
        let (x, ei) = results[bi].clone();
        return finish(x, perms[bi].clone(), ei);
    }

    let bi = direction.best_index(post.responses()).unwrap_or(0);
    let start = &post.points()[bi];
    let mut xc = config.fixed_x.clone().unwrap_or_else(|| start.x.clone());
    let mut oc = start.o.clone();
    let mut best = (xc.clone(), oc.clone(), expected_improvement(post, &QSPoint { x: xc.clone(), o: oc.clone() }, incumbent, direction));
    let seeds: Vec<Vec<usize>> = post.points().iter().map(|w| w.o.clone()).collect();
    let mut trace = Vec::new();
    for round in 0..config.n_round {
        let mut rng = seeded(config.seed, round as u64);
        let (x, ei_x) = x_search(post, &oc, incumbent, direction, config, &mut rng);
        xc = x;
        if ei_x > best.2 {
            best = (xc.clone(), oc.clone(), ei_x);
        }
        let sc = SftaConfig { seed: config.seed.wrapping_add(1 + round as u64), ..config.sfta.clone() };
        let out = sfta(
            |o| -expected_improvement(post, &QSPoint { x: xc.clone(), o: o.to_vec() }, incumbent, direction),
            k,
            &sc,
            &seeds,
            Some(&oc),
        );
        oc = out.best;
        let ei = -out.value;
        if ei > best.2 {
            best = (xc.clone(), oc.clone(), ei);
        }
        trace.push(best.2);
        if inner_stop(&trace, config.alpha) {
            break;
        }
    }
    finish(best.0, best.1, best.2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magp::{MaGPModel, MaGPParams, MappingMatrix};
    use crate::qscore::{random_perm, Bounds};
    use rand::Rng;

    fn model(seed: u64, n: usize, k: usize) -> MaGPModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = 2.min(k - 1);
        let nf = MappingMatrix::free_count(k, t);
        let p = MaGPParams {
            mu: 0.0,
            sigma2: (0..k).map(|_| rng.random_range(0.3..1.5)).collect(),
            theta: (0..k).map(|_| rng.random_range(1.0..6.0)).collect(),
            mapping: MappingMatrix::from_free(k, t, (0..nf).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap(),
            tau2: 0.0,
        };
        let pts: Vec<QSPoint> = (0..n)
            .map(|_| QSPoint { x: (0..k).map(|_| rng.random()).collect(), o: random_perm(k, &mut rng) })
            .collect();
        let y = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        MaGPModel::from_params(pts, y, p, Bounds::unit(k), true, 0.0).unwrap()
    }

    fn incumbent(post: &Posterior, d: Direction) -> f64 {
        post.responses()[d.best_index(post.responses()).unwrap()]
    }

    #[test]
    fn single_point_explores_away() {
        let p = MaGPParams {
            mu: 0.0,
            sigma2: vec![1.0],
            theta: vec![5.0],
            mapping: MappingMatrix::zeros(2, 1).unwrap(),
            tau2: 0.0,
        };
        // k = 2 with the second component flat, single training point
        let p = MaGPParams { sigma2: vec![1.0, 1e-6], theta: vec![5.0, 1.0], ..p };
        let pts = vec![QSPoint::new(vec![0.3, 0.5], vec![1, 2]).unwrap()];
        let m = MaGPModel::from_params(pts, vec![0.0], p, Bounds::unit(2), false, 0.0).unwrap();
        let (x, ei) = optimize_x_given_o(m.posterior(), &[1, 2], 0.0, Direction::Minimize, &EgoConfig::default());
        assert!((x[0] - 0.3).abs() > 0.25, "{x:?}");
        assert!(ei > 0.0);
    }

    #[test]
    fn result_dominates_starts() {
        let m = model(1, 8, 3);
        let post = m.posterior();
        let inc = incumbent(post, Direction::Maximize);
        let cfg = EgoConfig::default();
        let (_, ei) = optimize_x_given_o(post, &[2, 3, 1], inc, Direction::Maximize, &cfg);
        let mut rng = seeded(cfg.seed, 0);
        for x in starts(post, Direction::Maximize, cfg.x_starts, &mut rng) {
            let e = expected_improvement(post, &QSPoint { x, o: vec![2, 3, 1] }, inc, Direction::Maximize);
            assert!(ei >= e);
        }
    }

    #[test]
    fn enumeration_beats_grid() {
        let m = model(2, 8, 3);
        let post = m.posterior();
        let inc = incumbent(post, Direction::Minimize);
        let prop = propose_next(post, inc, Direction::Minimize, &EgoConfig::default());
        let g = [0.0, 0.25, 0.5, 0.75, 1.0];
        for o in all_perms(3) {
            for a in g {
                for b in g {
                    for c in g {
                        let w = QSPoint { x: vec![a, b, c], o: o.clone() };
                        assert!(prop.ei >= expected_improvement(post, &w, inc, Direction::Minimize) - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn alternation_path() {
        let m = model(3, 12, 6);
        let post = m.posterior();
        let inc = incumbent(post, Direction::Minimize);
        let cfg = EgoConfig { n_round: 4, ..Default::default() };
        let prop = propose_next(post, inc, Direction::Minimize, &cfg);
        let bi = Direction::Minimize.best_index(post.responses()).unwrap();
        let at_inc = expected_improvement(post, &post.points()[bi], inc, Direction::Minimize);
        assert!(prop.ei >= at_inc);
        assert!(prop.ei > 0.0);
        let again = propose_next(post, inc, Direction::Minimize, &cfg);
        assert_eq!(prop, again);
    }

    #[test]
    fn inner_stop_rule() {
        assert!(!inner_stop(&[1.0, 1.0], 0.01));
        assert!(inner_stop(&[1.0, 1.005, 1.009], 0.01));
        assert!(!inner_stop(&[1.0, 1.005, 1.02], 0.01));
    }
}
