//! Points, bounds and sequence designs for quantitative-sequence factors.
//!
//! Orders are 1-based. `o[h]` is the position at which component `h + 1`
//! is applied; `alpha[i]` is the component applied at position `i + 1`.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub fn is_perm(p: &[usize]) -> bool {
    let k = p.len();
    let mut seen = vec![false; k];
    for &v in p {
        if v == 0 || v > k || seen[v - 1] {
            return false;
        }
        seen[v - 1] = true;
    }
    true
}

pub fn check_perm(p: &[usize]) -> Result<()> {
    if is_perm(p) {
        Ok(())
    } else {
        invalid(format!("{p:?} is not a permutation of 1..{}", p.len()))
    }
}

/// Inverse permutation, no validation.
pub(crate) fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &v) in p.iter().enumerate() {
        inv[v - 1] = i + 1;
    }
    inv
}

/// Component sequence for an order vector (its inverse permutation).
pub fn alpha_from_o(o: &[usize]) -> Result<Vec<usize>> {
    check_perm(o)?;
    Ok(invert(o))
}

pub fn hamming(u: &[usize], v: &[usize]) -> Result<usize> {
    if u.len() != v.len() {
        return invalid(format!("length mismatch: {} vs {}", u.len(), v.len()));
    }
    Ok(hamming_unchecked(u, v))
}

pub(crate) fn hamming_unchecked(u: &[usize], v: &[usize]) -> usize {
    u.iter().zip(v).filter(|(a, b)| a != b).count()
}

pub fn random_perm<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (1..=k).collect();
    p.shuffle(rng);
    p
}

/// Advances `p` to the next permutation in lexicographic order.
pub fn next_perm(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// All permutations of 1..k in lexicographic order.
pub fn all_perms(k: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (1..=k).collect();
    let mut out = vec![p.clone()];
    while next_perm(&mut p) {
        out.push(p.clone());
    }
    out
}

/// k! saturating at u64::MAX.
pub fn factorial(k: usize) -> u64 {
    (1..=k as u64).fold(1u64, |acc, v| acc.saturating_mul(v))
}

/// One experimental setting. `x` is on the unit scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSPoint {
    pub x: Vec<f64>,
    pub o: Vec<usize>,
}

impl QSPoint {
    pub fn new(x: Vec<f64>, o: Vec<usize>) -> Result<Self> {
        if x.len() != o.len() {
            return invalid(format!("x has {} entries but o has {}", x.len(), o.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return invalid("x must be finite");
        }
        check_perm(&o)?;
        Ok(QSPoint { x, o })
    }

    pub fn k(&self) -> usize {
        self.o.len()
    }

    pub fn alpha(&self) -> Vec<usize> {
        invert(&self.o)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Bounds { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn unit(k: usize) -> Self {
        Bounds { lower: vec![0.0; k], upper: vec![1.0; k] }
    }

    pub fn uniform(k: usize, lo: f64, hi: f64) -> Result<Self> {
        Bounds::new(vec![lo; k], vec![hi; k])
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return invalid("bounds: lower and upper differ in length");
        }
        for (h, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return invalid(format!("bounds: component {} needs lower < upper", h + 1));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.lower.len()
    }

    pub fn to_unit(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(h, v)| (v - self.lower[h]) / (self.upper[h] - self.lower[h]))
            .collect()
    }

    pub fn to_raw(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .enumerate()
            .map(|(h, v)| self.lower[h] + v * (self.upper[h] - self.lower[h]))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    /// Row entries are order positions of components (O).
    ComponentIndexed,
    /// Row entries are the components at each position (O').
    PositionIndexed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceDesign {
    pub rows: Vec<Vec<usize>>,
    pub representation: Representation,
}

impl SequenceDesign {
    pub fn new(rows: Vec<Vec<usize>>, representation: Representation) -> Result<Self> {
        if let Some(first) = rows.first() {
            let k = first.len();
            for r in &rows {
                if r.len() != k {
                    return invalid("sequence design rows differ in length");
                }
                check_perm(r)?;
            }
        }
        Ok(SequenceDesign { rows, representation })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    /// Rowwise inverse into the other representation.
    pub fn convert(&self) -> SequenceDesign {
        let representation = match self.representation {
            Representation::ComponentIndexed => Representation::PositionIndexed,
            Representation::PositionIndexed => Representation::ComponentIndexed,
        };
        SequenceDesign { rows: self.rows.iter().map(|r| invert(r)).collect(), representation }
    }

    pub fn to(&self, representation: Representation) -> SequenceDesign {
        if self.representation == representation {
            self.clone()
        } else {
            self.convert()
        }
    }
}

pub fn convert_design(design: &SequenceDesign) -> Result<SequenceDesign> {
    let checked = SequenceDesign::new(design.rows.clone(), design.representation)?;
    Ok(checked.convert())
}

/// Initial design with X on the unit scale and component-indexed orders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSDesign {
    pub x: Vec<Vec<f64>>,
    pub orders: SequenceDesign,
    pub nu_p: f64,
    pub c_p: f64,
}

impl QSDesign {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn points(&self) -> Vec<QSPoint> {
        let o = self.orders.to(Representation::ComponentIndexed);
        self.x.iter().zip(o.rows).map(|(x, o)| QSPoint { x: x.clone(), o }).collect()
    }
}

/// A row of the shared CSV run format, x on the raw scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Run {
    pub x: Vec<f64>,
    pub o: Vec<usize>,
    pub y: Option<f64>,
}

pub fn csv_header(k: usize, with_y: bool) -> Vec<String> {
    let mut h: Vec<String> = (1..=k).map(|i| format!("x_{i}")).collect();
    h.extend((1..=k).map(|i| format!("o_{i}")));
    if with_y {
        h.push("y".into());
    }
    h
}

pub fn write_runs<W: Write>(w: W, k: usize, runs: &[Run]) -> Result<()> {
    let with_y = runs.iter().any(|r| r.y.is_some());
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(csv_header(k, with_y))?;
    for r in runs {
        if r.x.len() != k || r.o.len() != k {
            return invalid("run length does not match k");
        }
        let mut rec: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
        rec.extend(r.o.iter().map(|v| v.to_string()));
        if with_y {
            rec.push(r.y.map(|v| v.to_string()).unwrap_or_default());
        }
        wr.write_record(rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Parses the shared CSV run format; returns k and the rows.
pub fn read_runs<R: Read>(r: R) -> Result<(usize, Vec<Run>)> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rd.headers()?.clone();
    let k = header.iter().filter(|h| h.starts_with("x_")).count();
    let with_y = header.iter().any(|h| h == "y");
    let expected = csv_header(k, with_y);
    if k == 0 || header.iter().ne(expected.iter().map(|s| s.as_str())) {
        return invalid(format!("unexpected CSV header {:?}", header));
    }
    let mut runs = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Invalid(format!("row {}: bad {what}", line + 1));
        let x = (0..k)
            .map(|i| rec[i].parse::<f64>().map_err(|_| bad("x")))
            .collect::<Result<Vec<_>>>()?;
        let o = (k..2 * k)
            .map(|i| rec[i].parse::<usize>().map_err(|_| bad("o")))
            .collect::<Result<Vec<_>>>()?;
        check_perm(&o)?;
        let y = if with_y && !rec[2 * k].is_empty() {
            Some(rec[2 * k].parse::<f64>().map_err(|_| bad("y"))?)
        } else {
            None
        };
        runs.push(Run { x, o, y });
    }
    Ok((k, runs))
}
