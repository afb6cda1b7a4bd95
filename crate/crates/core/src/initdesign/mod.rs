//! Initial designs for quantitative-sequence experiments.
//!
//! Sequence designs are scored by `nu_p` (adjacent-pair balance plus row
//! Hamming separation) and full designs by `c_p` (combined L2 and Hamming
//! separation). Both are computed on the log p-th-power scale internally.

mod glp;
mod search;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::qscore::{hamming_unchecked, random_perm, Representation, SequenceDesign};

pub use glp::{glp_design, is_odd_prime, verify_glp, GlpDesign, GlpReport};
pub use search::{
    assemble_qs_design, maximin_lhd, search_sequence_design, select_candidate_subset, DesignBudget, TaBudget,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuPParams {
    pub rho1: f64,
    pub rho2: f64,
    pub p: f64,
}

impl Default for NuPParams {
    fn default() -> Self {
        NuPParams { rho1: 0.2, rho2: 0.8, p: 15.0 }
    }
}

impl NuPParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho1 >= 0.0 && self.rho2 >= 0.0 && self.rho1 + self.rho2 > 0.0 && self.p > 0.0) {
            return invalid("nu_p needs rho1, rho2 >= 0 with a positive sum and p > 0");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpParams {
    pub rho1p: f64,
    pub rho2p: f64,
    pub p: f64,
}

impl Default for CpParams {
    fn default() -> Self {
        CpParams { rho1p: 0.5, rho2p: 0.5, p: 15.0 }
    }
}

impl CpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho1p >= 0.0 && self.rho2p >= 0.0 && self.p > 0.0) {
            return invalid("c_p needs nonnegative weights and p > 0");
        }
        Ok(())
    }
}

/// ln(sum(exp(v))) ignoring -inf terms; -inf for an empty sum.
pub(crate) fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let v: Vec<f64> = terms.into_iter().filter(|t| *t > f64::NEG_INFINITY).collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Log p-th power of nu_p from count histograms: `ht[v]` ordered pairs with
/// t = v, `hh[v]` row pairs at Hamming distance v.
pub(crate) fn nu_log_from_hist(ht: &[usize], hh: &[usize], params: &NuPParams) -> f64 {
    let (l1, l2) = (params.rho1.ln(), params.rho2.ln());
    let p = params.p;
    let a = ht
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(v, c)| l1 + (*c as f64).ln() - p * ((v + 1) as f64).ln());
    let b = hh
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(v, c)| l2 + (*c as f64).ln() - p * ((v + 1) as f64).ln());
    log_sum_exp(a.chain(b))
}

fn require_position(design: &SequenceDesign) -> Result<()> {
    if design.representation != Representation::PositionIndexed {
        return invalid("expected a position-indexed (O') sequence design");
    }
    Ok(())
}

/// `t[i][j]`: how often component i+1 is immediately followed by component j+1.
pub fn pair_counts(oprime: &SequenceDesign) -> Result<Vec<Vec<usize>>> {
    require_position(oprime)?;
    let k = oprime.k();
    let mut t = vec![vec![0; k]; k];
    for row in &oprime.rows {
        for w in row.windows(2) {
            t[w[0] - 1][w[1] - 1] += 1;
        }
    }
    Ok(t)
}

pub(crate) fn histograms(rows: &[Vec<usize>]) -> (Vec<usize>, Vec<usize>) {
    let n = rows.len();
    let k = rows.first().map_or(0, |r| r.len());
    let mut t = vec![vec![0usize; k]; k];
    for row in rows {
        for w in row.windows(2) {
            t[w[0] - 1][w[1] - 1] += 1;
        }
    }
    let mut ht = vec![0; n + 1];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                ht[t[i][j]] += 1;
            }
        }
    }
    let mut hh = vec![0; k + 1];
    for i in 0..n {
        for j in i + 1..n {
            hh[hamming_unchecked(&rows[i], &rows[j])] += 1;
        }
    }
    (ht, hh)
}

/// ln of nu_p raised to the p-th power.
pub fn nu_p_log(oprime: &SequenceDesign, params: &NuPParams) -> Result<f64> {
    require_position(oprime)?;
    params.validate()?;
    let (ht, hh) = histograms(&oprime.rows);
    Ok(nu_log_from_hist(&ht, &hh, params))
}

pub fn nu_p(oprime: &SequenceDesign, params: &NuPParams) -> Result<f64> {
    Ok((nu_p_log(oprime, params)? / params.p).exp())
}

pub(crate) fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// ln of c_p raised to the p-th power; -inf for fewer than two rows.
pub fn c_p_log(x: &[Vec<f64>], oprime: &SequenceDesign, params: &CpParams) -> Result<f64> {
    params.validate()?;
    if x.len() != oprime.n() {
        return invalid(format!("X has {} rows but the sequence design has {}", x.len(), oprime.n()));
    }
    let n = x.len();
    let mut terms = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = l2(&x[i], &x[j]);
            let h = hamming_unchecked(&oprime.rows[i], &oprime.rows[j]) as f64;
            terms.push(-params.p * (params.rho1p * d + params.rho2p * h + 1.0).ln());
        }
    }
    Ok(log_sum_exp(terms))
}

pub fn c_p(x: &[Vec<f64>], oprime: &SequenceDesign, params: &CpParams) -> Result<f64> {
    Ok((c_p_log(x, oprime, params)? / params.p).exp())
}

/// Random Latin hypercube on [0,1]^k with uniform jitter inside each bin.
pub fn random_lhs<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut x = vec![vec![0.0; k]; n];
    for h in 0..k {
        let perm = random_perm(n, rng);
        for (i, row) in x.iter_mut().enumerate() {
            row[h] = (perm[i] as f64 - 1.0 + rng.random::<f64>()) / n as f64;
        }
    }
    x
}

/// Property report emitted alongside design files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub n: usize,
    pub k: usize,
    pub nu_p: f64,
    pub c_p: f64,
    pub min_distance: f64,
    pub min_hamming: usize,
    /// Number of ordered component pairs with each adjacency count.
    pub pair_count_histogram: BTreeMap<usize, usize>,
}

pub fn design_report(x: &[Vec<f64>], oprime: &SequenceDesign, nu: &NuPParams, cp: &CpParams) -> Result<DesignReport> {
    let t = pair_counts(oprime)?;
    let k = oprime.k();
    let mut hist = BTreeMap::new();
    for (i, row) in t.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if i != j {
                *hist.entry(*c).or_insert(0) += 1;
            }
        }
    }
    let n = x.len();
    let mut min_distance = f64::INFINITY;
    let mut min_hamming = k;
    for i in 0..n {
        for j in i + 1..n {
            min_distance = min_distance.min(l2(&x[i], &x[j]));
            min_hamming = min_hamming.min(hamming_unchecked(&oprime.rows[i], &oprime.rows[j]));
        }
    }
    Ok(DesignReport {
        n,
        k,
        nu_p: nu_p(oprime, nu)?,
        c_p: c_p(x, oprime, cp)?,
        min_distance,
        min_hamming,
        pair_count_histogram: hist,
    })
}
