use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::optim::thresholds;
use crate::qscore::{hamming_unchecked, random_perm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SftaConfig {
    pub n_steps_phase1: usize,
    pub n_seq: usize,
    pub n_rounds: usize,
    pub n_steps_phase2: usize,
    pub seed: u64,
}

impl Default for SftaConfig {
    fn default() -> Self {
        SftaConfig { n_steps_phase1: 200, n_seq: 100, n_rounds: 10, n_steps_phase2: 100, seed: 0 }
    }
}

impl SftaConfig {
    pub fn max_evaluations(&self) -> usize {
        self.n_steps_phase1 + self.n_seq + self.n_rounds * self.n_steps_phase2 + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SftaOutcome {
    pub best: Vec<usize>,
    pub value: f64,
    /// Distinct objective evaluations.
    pub evaluations: usize,
    pub thresholds: Vec<f64>,
}

/// Two distinct positions swapped.
pub fn neighbor<R: Rng + ?Sized>(o: &[usize], rng: &mut R) -> Vec<usize> {
    let k = o.len();
    let i = rng.random_range(0..k);
    let mut j = rng.random_range(0..k - 1);
    if j >= i {
        j += 1;
    }
    let mut n = o.to_vec();
    n.swap(i, j);
    n
}

/// Space-filling threshold accepting over permutations of 1..k (minimizes).
///
/// Phase I draws random permutations and accepts each with probability equal
/// to its minimum Hamming distance to the accepted set divided by k; the
/// accepted set starts from `seeds` and the start point. Phase II runs
/// threshold accepting from the best point found, with swap neighbors.
pub fn sfta<F>(mut objective: F, k: usize, config: &SftaConfig, seeds: &[Vec<usize>], start: Option<&[usize]>) -> SftaOutcome
where
    F: FnMut(&[usize]) -> f64,
{
    assert!(k >= 2, "sfta needs k >= 2");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut memo: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut eval = |o: &[usize]| -> f64 {
        if let Some(v) = memo.get(o) {
            return *v;
        }
        let v = objective(o);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        memo.insert(o.to_vec(), v);
        v
    };

    let o0 = start.map(|s| s.to_vec()).unwrap_or_else(|| random_perm(k, &mut rng));
    let mut best_v = eval(&o0);
    let mut best = o0.clone();
    let mut accepted: Vec<Vec<usize>> = seeds.iter().filter(|s| s.len() == k).cloned().collect();
    accepted.push(o0);

    let max_attempts = 50 * config.n_steps_phase1.max(1);
    let mut taken = 0;
    let mut attempts = 0;
    while taken < config.n_steps_phase1 && attempts < max_attempts {
        attempts += 1;
        let o = random_perm(k, &mut rng);
        let hmin = accepted.iter().map(|a| hamming_unchecked(a, &o)).min().unwrap_or(k);
        if hmin as f64 / k as f64 > rng.random::<f64>() {
            taken += 1;
            let v = eval(&o);
            if v < best_v {
                best_v = v;
                best = o.clone();
            }
            accepted.push(o);
        }
    }
    if attempts >= max_attempts && taken < config.n_steps_phase1 {
        log::debug!("sfta phase I stopped after {attempts} proposals with {taken} acceptances");
    }

    let mut cur = best.clone();
    let mut cur_v = best_v;
    let deltas: Vec<f64> = (0..config.n_seq)
        .map(|_| {
            let n = neighbor(&cur, &mut rng);
            (eval(&n) - cur_v).abs()
        })
        .filter(|d| d.is_finite())
        .collect();
    let taus = thresholds(deltas, config.n_rounds);
    for &tau in &taus {
        for _ in 0..config.n_steps_phase2 {
            let n = neighbor(&cur, &mut rng);
            let v = eval(&n);
            if v - cur_v <= tau {
                cur = n;
                cur_v = v;
                if v < best_v {
                    best_v = v;
                    best = cur.clone();
                }
            }
        }
    }
    SftaOutcome { best, value: best_v, evaluations: memo.len(), thresholds: taus }
}
