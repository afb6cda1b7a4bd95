use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{c_p, histograms, l2, log_sum_exp, nu_log_from_hist, nu_p, CpParams, NuPParams};
use crate::error::{invalid, Result};
use crate::optim::{threshold_accepting, TaSchedule, TaState};
use crate::qscore::{random_perm, QSDesign, Representation, SequenceDesign};

/// Threshold-accepting effort: `steps` moves split evenly over `n_rounds`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaBudget {
    pub restarts: usize,
    pub steps: usize,
    pub n_rounds: usize,
    pub n_seq: usize,
}

impl Default for TaBudget {
    fn default() -> Self {
        TaBudget { restarts: 10, steps: 5000, n_rounds: 10, n_seq: 100 }
    }
}

impl TaBudget {
    fn schedule(&self) -> TaSchedule {
        let n_rounds = self.n_rounds.max(1);
        TaSchedule { n_seq: self.n_seq.max(2), n_rounds, n_steps: (self.steps / n_rounds).max(1) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignBudget {
    pub sequence: TaBudget,
    pub lhd: TaBudget,
    pub rows: TaBudget,
}

impl Default for DesignBudget {
    fn default() -> Self {
        DesignBudget {
            sequence: TaBudget::default(),
            lhd: TaBudget { restarts: 4, steps: 5000, ..Default::default() },
            rows: TaBudget { restarts: 1, steps: 2000, ..Default::default() },
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs restarts in parallel and keeps the lowest value, ties to the lowest index.
fn best_of<S, F>(restarts: usize, run: F) -> (S, f64)
where
    S: Send,
    F: Fn(usize) -> (S, f64) + Sync + Send,
{
    let results: Vec<(S, f64)> = (0..restarts.max(1)).into_par_iter().map(&run).collect();
    let mut best: Option<(S, f64)> = None;
    for r in results {
        if best.as_ref().is_none_or(|b| r.1 < b.1) {
            best = Some(r);
        }
    }
    best.unwrap()
}

#[derive(Clone)]
struct SeqState {
    rows: Vec<Vec<usize>>,
    t: Vec<Vec<usize>>,
    ht: Vec<usize>,
    hh: Vec<usize>,
    params: NuPParams,
    value: f64,
    last: Option<(usize, usize, usize)>,
}

impl SeqState {
    fn new(rows: Vec<Vec<usize>>, params: NuPParams) -> Self {
        let k = rows[0].len();
        let mut t = vec![vec![0; k]; k];
        for row in &rows {
            for w in row.windows(2) {
                t[w[0] - 1][w[1] - 1] += 1;
            }
        }
        let (ht, hh) = histograms(&rows);
        let value = nu_log_from_hist(&ht, &hh, &params);
        SeqState { rows, t, ht, hh, params, value, last: None }
    }

    fn adjust_pairs(&mut self, r: usize, add: bool) {
        let k = self.rows[r].len();
        for p in 0..k - 1 {
            let (a, b) = (self.rows[r][p] - 1, self.rows[r][p + 1] - 1);
            let c = &mut self.t[a][b];
            self.ht[*c] -= 1;
            if add {
                *c += 1;
            } else {
                *c -= 1;
            }
            self.ht[*c] += 1;
        }
    }

    fn swap(&mut self, r: usize, a: usize, b: usize) {
        self.adjust_pairs(r, false);
        for s in 0..self.rows.len() {
            if s == r {
                continue;
            }
            let before = self.hamming_at(r, s, a, b);
            self.rows[r].swap(a, b);
            let after = self.hamming_at(r, s, a, b);
            self.rows[r].swap(a, b);
            if before != after {
                let h = crate::qscore::hamming_unchecked(&self.rows[r], &self.rows[s]);
                self.hh[h] -= 1;
                self.hh[h + after - before] += 1;
            }
        }
        self.rows[r].swap(a, b);
        self.adjust_pairs(r, true);
        self.value = nu_log_from_hist(&self.ht, &self.hh, &self.params);
    }

    fn hamming_at(&self, r: usize, s: usize, a: usize, b: usize) -> usize {
        usize::from(self.rows[r][a] != self.rows[s][a]) + usize::from(self.rows[r][b] != self.rows[s][b])
    }
}

// thresholds act on sum of terms (nu_p^p), not its log
impl TaState for SeqState {
    fn value(&self) -> f64 {
        self.value.exp()
    }

    fn perturb(&mut self, rng: &mut dyn RngCore) -> f64 {
        let k = self.rows[0].len();
        let r = rng.random_range(0..self.rows.len());
        let a = rng.random_range(0..k);
        let mut b = rng.random_range(0..k - 1);
        if b >= a {
            b += 1;
        }
        self.swap(r, a, b);
        self.last = Some((r, a, b));
        self.value()
    }

    fn undo(&mut self) {
        if let Some((r, a, b)) = self.last.take() {
            self.swap(r, a, b);
        }
    }
}

/// Threshold-accepting search for a position-indexed sequence design
/// minimizing `nu_p`, swapping two entries of a random row per move.
pub fn search_sequence_design(n: usize, k: usize, params: &NuPParams, budget: &TaBudget, seed: u64) -> Result<SequenceDesign> {
    params.validate()?;
    if n < 2 || k < 2 {
        return invalid("sequence design search needs n >= 2 and k >= 2");
    }
    let sched = budget.schedule();
    let (best, _) = best_of(budget.restarts, |r| {
        let mut rng = rng_for(seed, r as u64);
        let rows = (0..n).map(|_| random_perm(k, &mut rng)).collect();
        let (s, v) = threshold_accepting(SeqState::new(rows, *params), sched, &mut rng);
        (s.rows, v)
    });
    SequenceDesign::new(best, Representation::PositionIndexed)
}

#[derive(Clone)]
struct LhdState {
    cols: Vec<Vec<usize>>,
    d2: Vec<Vec<f64>>,
    n: usize,
    value: f64,
    last: Option<(usize, usize, usize)>,
}

const LHD_P: f64 = 15.0;

impl LhdState {
    fn new(cols: Vec<Vec<usize>>) -> Self {
        let n = cols[0].len();
        let mut d2 = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let s: f64 = cols.iter().map(|c| (level(c[i], n) - level(c[j], n)).powi(2)).sum();
                d2[i][j] = s;
                d2[j][i] = s;
            }
        }
        let mut st = LhdState { cols, d2, n, value: 0.0, last: None };
        st.value = st.objective();
        st
    }

    // ln sum d^-p, the Morris-Mitchell criterion on the log p-th-power scale
    fn objective(&self) -> f64 {
        let mut terms = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                terms.push(-0.5 * LHD_P * self.d2[i][j].ln());
            }
        }
        log_sum_exp(terms)
    }

    fn swap(&mut self, c: usize, a: usize, b: usize) {
        let n = self.n;
        let col = &self.cols[c];
        let (la, lb) = (level(col[a], n), level(col[b], n));
        for s in 0..n {
            if s == a || s == b {
                continue;
            }
            let ls = level(col[s], n);
            let da = (lb - ls).powi(2) - (la - ls).powi(2);
            self.d2[a][s] += da;
            self.d2[s][a] = self.d2[a][s];
            self.d2[b][s] -= da;
            self.d2[s][b] = self.d2[b][s];
        }
        self.cols[c].swap(a, b);
        self.value = self.objective();
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.cols.iter().map(|c| level(c[i], self.n)).collect()).collect()
    }
}

fn level(v: usize, n: usize) -> f64 {
    (2.0 * v as f64 - 1.0) / (2.0 * n as f64)
}

impl TaState for LhdState {
    fn value(&self) -> f64 {
        self.value
    }

    fn perturb(&mut self, rng: &mut dyn RngCore) -> f64 {
        let c = rng.random_range(0..self.cols.len());
        let a = rng.random_range(0..self.n);
        let mut b = rng.random_range(0..self.n - 1);
        if b >= a {
            b += 1;
        }
        self.swap(c, a, b);
        self.last = Some((c, a, b));
        self.value
    }

    fn undo(&mut self) {
        if let Some((c, a, b)) = self.last.take() {
            self.swap(c, a, b);
        }
    }
}

/// Maximin Latin hypercube on the levels (2i-1)/(2n).
pub fn maximin_lhd(n: usize, k: usize, budget: &TaBudget, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n < 2 || k < 1 {
        return invalid("maximin_lhd needs n >= 2 and k >= 1");
    }
    let sched = budget.schedule();
    let (best, _) = best_of(budget.restarts, |r| {
        let mut rng = rng_for(seed ^ 0x4c48_4400, r as u64);
        let cols = (0..k).map(|_| random_perm(n, &mut rng)).collect();
        let (s, v) = threshold_accepting(LhdState::new(cols), sched, &mut rng);
        (s.matrix(), v)
    });
    Ok(best)
}

#[derive(Clone)]
struct RowState {
    perm: Vec<usize>,
    d: std::sync::Arc<Vec<Vec<f64>>>,
    h: std::sync::Arc<Vec<Vec<f64>>>,
    params: CpParams,
    value: f64,
    last: Option<(usize, usize)>,
}

impl RowState {
    fn objective(&self) -> f64 {
        let n = self.perm.len();
        let mut terms = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let d = self.d[self.perm[i]][self.perm[j]];
                terms.push(-self.params.p * (self.params.rho1p * d + self.params.rho2p * self.h[i][j] + 1.0).ln());
            }
        }
        log_sum_exp(terms)
    }
}

impl TaState for RowState {
    fn value(&self) -> f64 {
        self.value
    }

    fn perturb(&mut self, rng: &mut dyn RngCore) -> f64 {
        let n = self.perm.len();
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        self.perm.swap(a, b);
        self.last = Some((a, b));
        self.value = self.objective();
        self.value
    }

    fn undo(&mut self) {
        if let Some((a, b)) = self.last.take() {
            self.perm.swap(a, b);
            self.value = self.objective();
        }
    }
}

/// Row pairing of X against O' minimizing `c_p`, starting from the identity.
fn pair_rows(x: &[Vec<f64>], oprime: &SequenceDesign, params: &CpParams, budget: &TaBudget, seed: u64) -> Vec<Vec<f64>> {
    let n = x.len();
    let d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| l2(&x[i], &x[j])).collect()).collect();
    let h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| crate::qscore::hamming_unchecked(&oprime.rows[i], &oprime.rows[j]) as f64).collect())
        .collect();
    let (d, h) = (std::sync::Arc::new(d), std::sync::Arc::new(h));
    let sched = budget.schedule();
    let (perm, _) = best_of(budget.restarts, |r| {
        let mut rng = rng_for(seed ^ 0x524f_5753, r as u64);
        let mut st = RowState { perm: (0..n).collect(), d: d.clone(), h: h.clone(), params: *params, value: 0.0, last: None };
        st.value = st.objective();
        let (s, v) = threshold_accepting(st, sched, &mut rng);
        (s.perm, v)
    });
    perm.iter().map(|&i| x[i].clone()).collect()
}

/// Full initial design: sequence search, maximin LHD, then row pairing.
/// X stays on the unit scale.
pub fn assemble_qs_design(
    n: usize,
    k: usize,
    nu: &NuPParams,
    cp: &CpParams,
    budget: &DesignBudget,
    seed: u64,
) -> Result<QSDesign> {
    cp.validate()?;
    let oprime = search_sequence_design(n, k, nu, &budget.sequence, seed)?;
    let lhd = maximin_lhd(n, k, &budget.lhd, seed)?;
    let x = pair_rows(&lhd, &oprime, cp, &budget.rows, seed);
    Ok(QSDesign {
        nu_p: nu_p(&oprime, nu)?,
        c_p: c_p(&x, &oprime, cp)?,
        orders: oprime.convert(),
        x,
    })
}

#[derive(Clone)]
struct SubsetState {
    chosen: Vec<usize>,
    rest: Vec<usize>,
    points: std::sync::Arc<Vec<crate::qscore::QSPoint>>,
    params: CpParams,
    value: f64,
    last: Option<(usize, usize)>,
}

impl SubsetState {
    fn objective(&self) -> f64 {
        let n = self.chosen.len();
        let mut terms = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&self.points[self.chosen[i]], &self.points[self.chosen[j]]);
                let d = l2(&a.x, &b.x);
                let h = crate::qscore::hamming_unchecked(&a.o, &b.o) as f64;
                terms.push(-self.params.p * (self.params.rho1p * d + self.params.rho2p * h + 1.0).ln());
            }
        }
        log_sum_exp(terms)
    }

    fn exchange(&mut self, i: usize, j: usize) {
        std::mem::swap(&mut self.chosen[i], &mut self.rest[j]);
        self.value = self.objective();
    }
}

impl TaState for SubsetState {
    fn value(&self) -> f64 {
        self.value
    }

    fn perturb(&mut self, rng: &mut dyn RngCore) -> f64 {
        let i = rng.random_range(0..self.chosen.len());
        let j = rng.random_range(0..self.rest.len());
        self.exchange(i, j);
        self.last = Some((i, j));
        self.value
    }

    fn undo(&mut self) {
        if let Some((i, j)) = self.last.take() {
            self.exchange(i, j);
        }
    }
}

/// Picks `n` of the given unit-scale candidate points minimizing `c_p`
/// (Hamming distances between orders), exchanging one member per move.
/// Returns sorted candidate indices.
pub fn select_candidate_subset(
    candidates: &[crate::qscore::QSPoint],
    n: usize,
    params: &CpParams,
    budget: &TaBudget,
    seed: u64,
) -> Result<Vec<usize>> {
    params.validate()?;
    if n == 0 || n > candidates.len() {
        return invalid(format!("cannot pick {n} of {} candidates", candidates.len()));
    }
    if n == candidates.len() {
        return Ok((0..n).collect());
    }
    let points = std::sync::Arc::new(candidates.to_vec());
    let sched = budget.schedule();
    let (mut best, _) = best_of(budget.restarts, |r| {
        let mut rng = rng_for(seed ^ 0x5355_4253, r as u64);
        let perm = random_perm(candidates.len(), &mut rng);
        let idx: Vec<usize> = perm.iter().map(|v| v - 1).collect();
        let mut st = SubsetState {
            chosen: idx[..n].to_vec(),
            rest: idx[n..].to_vec(),
            points: points.clone(),
            params: *params,
            value: 0.0,
            last: None,
        };
        st.value = st.objective();
        let (s, v) = threshold_accepting(st, sched, &mut rng);
        (s.chosen, v)
    });
    best.sort();
    Ok(best)
}
