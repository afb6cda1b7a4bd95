//! Linear pairwise-order (PWO) and component-position (CP) models with
//! quantitative main effects, and the sequential predict-and-pick baseline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::acquisition::Direction;
use crate::error::{invalid, Result};
use crate::qscore::{check_perm, QSPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Pwo,
    Cp,
}

/// +1 when p precedes q in `alpha`, -1 otherwise, for p < q in lexicographic order.
pub fn pwo_features(alpha: &[usize]) -> Result<Vec<f64>> {
    check_perm(alpha)?;
    let k = alpha.len();
    let mut pos = vec![0; k];
    for (i, &c) in alpha.iter().enumerate() {
        pos[c - 1] = i;
    }
    let mut z = Vec::with_capacity(k * (k - 1) / 2);
    for p in 0..k {
        for q in p + 1..k {
            z.push(if pos[p] < pos[q] { 1.0 } else { -1.0 });
        }
    }
    Ok(z)
}

/// Indicator of component c at position j, for j, c in 1..k-1; entry
/// (j-1)(k-1) + (c-1).
pub fn cp_features(alpha: &[usize]) -> Result<Vec<f64>> {
    check_perm(alpha)?;
    let k = alpha.len();
    let m = k - 1;
    let mut f = vec![0.0; m * m];
    for j in 0..m {
        let c = alpha[j];
        if c <= m {
            f[j * m + c - 1] = 1.0;
        }
    }
    Ok(f)
}

fn design_row(kind: LinearKind, x: &[f64], alpha: &[usize]) -> Result<Vec<f64>> {
    let mut row = Vec::with_capacity(1 + x.len() + alpha.len() * alpha.len());
    row.push(1.0);
    row.extend_from_slice(x);
    row.extend(match kind {
        LinearKind::Pwo => pwo_features(alpha)?,
        LinearKind::Cp => cp_features(alpha)?,
    });
    Ok(row)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSeqModel {
    pub kind: LinearKind,
    pub k: usize,
    /// Intercept, then the k quantitative slopes, then the order terms.
    pub coefficients: Vec<f64>,
}

impl LinearSeqModel {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn order_terms(&self) -> &[f64] {
        &self.coefficients[1 + self.k..]
    }
}

pub fn feature_count(kind: LinearKind, k: usize) -> usize {
    1 + k + match kind {
        LinearKind::Pwo => k * (k - 1) / 2,
        LinearKind::Cp => (k - 1) * (k - 1),
    }
}

fn least_squares(kind: LinearKind, k: usize, points: &[QSPoint], y: &[f64]) -> Result<LinearSeqModel> {
    let p = feature_count(kind, k);
    if points.is_empty() {
        return Ok(LinearSeqModel { kind, k, coefficients: vec![0.0; p] });
    }
    let mut data = Vec::with_capacity(points.len() * p);
    for w in points {
        if w.k() != k {
            return invalid("points differ in k");
        }
        data.extend(design_row(kind, &w.x, &w.alpha())?);
    }
    let a = DMatrix::from_row_slice(points.len(), p, &data);
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * (points.len().max(p) as f64) * f64::EPSILON;
    let beta = svd.solve(&b, eps).map_err(|e| crate::Error::Fit(e.to_string()))?;
    Ok(LinearSeqModel { kind, k, coefficients: beta.iter().cloned().collect() })
}

/// Ordinary least squares with the minimum-norm solution when rank deficient.
pub fn fit_linear(kind: LinearKind, points: &[QSPoint], y: &[f64]) -> Result<LinearSeqModel> {
    if points.is_empty() || points.len() != y.len() {
        return invalid("fit_linear needs a non-empty data set with one response per point");
    }
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("non-finite response");
    }
    least_squares(kind, points[0].k(), points, y)
}

pub fn predict_linear(model: &LinearSeqModel, x: &[f64], alpha: &[usize]) -> Result<f64> {
    if x.len() != model.k || alpha.len() != model.k {
        return invalid("dimension mismatch");
    }
    let row = design_row(model.kind, x, alpha)?;
    Ok(row.iter().zip(&model.coefficients).map(|(a, b)| a * b).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineTrajectory {
    /// Candidate indices in evaluation order, initial runs first.
    pub visited: Vec<usize>,
    pub responses: Vec<f64>,
    pub best: f64,
    pub best_index: usize,
}

/// Fit, evaluate the unvisited candidate with the best prediction, and stop
/// once a new observation fails to improve the incumbent.
pub fn sequential_baseline<F>(
    kind: LinearKind,
    candidates: &[QSPoint],
    initial: &[usize],
    direction: Direction,
    mut oracle: F,
) -> Result<BaselineTrajectory>
where
    F: FnMut(&QSPoint) -> Result<f64>,
{
    if candidates.is_empty() {
        return invalid("no candidates");
    }
    let k = candidates[0].k();
    let mut visited = Vec::new();
    let mut responses = Vec::new();
    for &i in initial {
        if i >= candidates.len() {
            return invalid(format!("initial index {i} out of range"));
        }
        if !visited.contains(&i) {
            visited.push(i);
            responses.push(oracle(&candidates[i])?);
        }
    }
    loop {
        let open: Vec<usize> = (0..candidates.len()).filter(|i| !visited.contains(i)).collect();
        if open.is_empty() {
            break;
        }
        let pts: Vec<QSPoint> = visited.iter().map(|&i| candidates[i].clone()).collect();
        let model = least_squares(kind, k, &pts, &responses)?;
        let mut pick = open[0];
        let mut pv = f64::NAN;
        for &i in &open {
            let v = predict_linear(&model, &candidates[i].x, &candidates[i].alpha())?;
            if pv.is_nan() || direction.better(v, pv) {
                pick = i;
                pv = v;
            }
        }
        let incumbent = direction.best_index(&responses).map(|b| responses[b]);
        let y = oracle(&candidates[pick])?;
        visited.push(pick);
        responses.push(y);
        if incumbent.is_some_and(|b| !direction.better(y, b)) {
            break;
        }
    }
    let bi = direction.best_index(&responses).unwrap_or(0);
    Ok(BaselineTrajectory { best: responses.get(bi).cloned().unwrap_or(f64::NAN), best_index: visited.get(bi).cloned().unwrap_or(0), visited, responses })
}
