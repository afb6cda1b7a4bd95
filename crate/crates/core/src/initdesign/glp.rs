use serde::{Deserialize, Serialize};

use super::{c_p, l2, log_sum_exp, nu_p, pair_counts, CpParams, NuPParams};
use crate::error::{invalid, Result};
use crate::qscore::{hamming_unchecked, Representation, SequenceDesign};

pub fn is_odd_prime(p: u64) -> bool {
    if p < 3 || p % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Good-lattice-point design with n = k = pr - 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlpDesign {
    pub pr: u64,
    /// Integer quantitative levels 1..n (reversed column order of the lattice).
    pub x_int: Vec<Vec<u64>>,
    /// `x_int` rescaled to [0,1].
    pub x: Vec<Vec<f64>>,
    pub oprime: SequenceDesign,
    pub o: SequenceDesign,
}

pub fn glp_design(pr: u64) -> Result<GlpDesign> {
    if !is_odd_prime(pr) {
        return invalid(format!("{pr} is not an odd prime"));
    }
    let n = (pr - 1) as usize;
    let d: Vec<Vec<u64>> = (1..=pr - 1).map(|i| (1..=pr - 1).map(|j| i * j % pr).collect()).collect();
    let x_int: Vec<Vec<u64>> = d.iter().map(|r| r.iter().rev().cloned().collect()).collect();
    let scale = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let x = x_int.iter().map(|r| r.iter().map(|v| (*v as f64 - 1.0) / scale).collect()).collect();
    let rows = d.iter().map(|r| r.iter().map(|v| *v as usize).collect()).collect();
    let oprime = SequenceDesign::new(rows, Representation::PositionIndexed)?;
    let o = oprime.convert();
    Ok(GlpDesign { pr, x_int, x, oprime, o })
}

/// Checks of the lattice design's separation and balance properties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlpReport {
    pub pr: u64,
    pub n: usize,
    pub all_hamming_equal_n: bool,
    pub pair_balanced: bool,
    /// Minimum squared row distance of the integer X.
    pub min_l2_squared: u64,
    /// n(n+1)(n+2)/12.
    pub expected_min_l2_squared: u64,
    pub d_ratio: f64,
    pub expected_d_ratio: f64,
    pub nu_p: f64,
    /// Closed form with rho1 on the pair term and rho2 on the Hamming term.
    pub nu_p_closed_form: f64,
    /// Closed form with the two weights exchanged.
    pub nu_p_closed_form_swapped: f64,
    pub nu_p_relative_error: f64,
    /// c_p on the integer-level design.
    pub c_p: f64,
    /// n^(1/p) times the separation constant.
    pub c_p_bound: f64,
}

/// ln{n(n-1)(w_pair/2^p + w_ham/(2(n+1)^p))}.
fn nu_closed_log(n: usize, w_pair: f64, w_ham: f64, p: f64) -> f64 {
    let nf = n as f64;
    (nf * (nf - 1.0)).ln()
        + log_sum_exp([
            w_pair.ln() - p * 2f64.ln(),
            w_ham.ln() - 2f64.ln() - p * (nf + 1.0).ln(),
        ])
}

pub fn verify_glp(pr: u64, nu: &NuPParams, cp: &CpParams) -> Result<GlpReport> {
    let g = glp_design(pr)?;
    let n = (pr - 1) as usize;
    let rows = &g.oprime.rows;
    let mut all_hamming = true;
    let mut min_sq = u64::MAX;
    for i in 0..n {
        for j in i + 1..n {
            all_hamming &= hamming_unchecked(&rows[i], &rows[j]) == n;
            let sq: u64 = g.x_int[i].iter().zip(&g.x_int[j]).map(|(a, b)| a.abs_diff(*b).pow(2)).sum();
            min_sq = min_sq.min(sq);
        }
    }
    let t = pair_counts(&g.oprime)?;
    let pair_balanced = (0..n).all(|i| (0..n).all(|j| i == j || t[i][j] == 1));
    let nf = n as f64;
    let expected = (n * (n + 1) * (n + 2) / 12) as u64;
    let d_upper = nf * ((nf + 1.0) / 6.0).sqrt();
    let nu_val = nu_p(&g.oprime, nu)?;
    let closed = (nu_closed_log(n, nu.rho1, nu.rho2, nu.p) / nu.p).exp();
    let swapped = (nu_closed_log(n, nu.rho2, nu.rho1, nu.p) / nu.p).exp();

    let xf: Vec<Vec<f64>> = g.x_int.iter().map(|r| r.iter().map(|v| *v as f64).collect()).collect();
    let cp_val = c_p(&xf, &g.oprime, cp)?;
    let (r1, r2, p) = (cp.rho1p, cp.rho2p, cp.p);
    let near = r1 * (nf * (nf + 1.0) * (nf + 2.0) / 12.0).sqrt() + nf * r2 + 1.0;
    let far = r1 * (nf * (nf * nf - 1.0) / 3.0).sqrt() + nf * r2 + 1.0;
    let c_const = log_sum_exp([(nf / 2.0 - 1.0).ln() - p * near.ln(), -(2f64.ln()) - p * far.ln()]);
    let bound = ((nf.ln() + c_const) / p).exp();

    Ok(GlpReport {
        pr,
        n,
        all_hamming_equal_n: all_hamming,
        pair_balanced,
        min_l2_squared: min_sq,
        expected_min_l2_squared: expected,
        d_ratio: l2_min(&xf) / d_upper,
        expected_d_ratio: ((nf + 2.0) / (2.0 * nf)).sqrt(),
        nu_p: nu_val,
        nu_p_closed_form: closed,
        nu_p_closed_form_swapped: swapped,
        nu_p_relative_error: (nu_val - closed).abs() / closed,
        c_p: cp_val,
        c_p_bound: bound,
    })
}

fn l2_min(x: &[Vec<f64>]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            m = m.min(l2(&x[i], &x[j]));
        }
    }
    m
}
