//! Benchmark objectives and an external-process oracle.
//!
//! Oracles receive points with x on the raw scale of their bounds.

mod data;
mod external;

use crate::acquisition::Direction;
use crate::error::{invalid, Error, Result};
use crate::qscore::{alpha_from_o, check_perm, Bounds, QSPoint};

pub use data::{drug_table, sms_instance, tsp_instance, DrugRow, SmsInstance, TspInstance};
pub use external::ExecOracle;

pub trait Oracle: Send + Sync {
    fn name(&self) -> String;
    fn k(&self) -> usize;
    fn bounds(&self) -> Bounds;
    fn direction(&self) -> Direction;
    /// Deterministic and safe to call concurrently.
    fn is_pure(&self) -> bool {
        true
    }
    fn evaluate(&self, w: &QSPoint) -> Result<f64>;
    /// Raw quantities held fixed when only the order varies.
    fn fixed_x(&self) -> Option<Vec<f64>> {
        None
    }
    /// The full list of settings, when the design space is finite.
    fn candidates(&self) -> Option<Vec<QSPoint>> {
        None
    }
}

fn check(x: &[f64], o: &[usize], k: usize) -> Result<()> {
    if x.len() != k || o.len() != k {
        return invalid(format!("expected {k} components"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("non-finite quantity");
    }
    check_perm(o)
}

/// Starts at 20 and applies +(1 + 10 sin 2 pi x1), -(2 + 10 (x2 - 0.4)^2),
/// *(3 + x3), /(4 - x4) in the order given by `o`.
pub fn four_ops(x: &[f64], o: &[usize]) -> Result<f64> {
    check(x, o, 4)?;
    let mut y = 20.0;
    for h in alpha_from_o(o)? {
        match h {
            1 => y += 1.0 + 10.0 * (2.0 * std::f64::consts::PI * x[0]).sin(),
            2 => y -= 2.0 + 10.0 * (x[1] - 0.4).powi(2),
            3 => y *= 3.0 + x[2],
            _ => y /= 4.0 - x[3],
        }
    }
    Ok(y)
}

fn weighted_completion(times: &[f64], weights: &[f64], alpha: &[usize]) -> f64 {
    let mut t = 0.0;
    let mut cost = 0.0;
    for (pos, &job) in alpha.iter().enumerate() {
        t += times[job - 1];
        cost += weights[pos] * t * t;
    }
    cost
}

/// Weighted squared completion time of the bundled six-job instance.
pub fn sms_cost(o: &[usize]) -> Result<f64> {
    let inst = data::tables()?;
    check(&inst.sms.processing, o, 6)?;
    Ok(weighted_completion(&inst.sms.processing, &inst.sms.weights, &alpha_from_o(o)?))
}

/// Revenue on total processing time minus the weighted completion cost.
pub fn sms_profit(x: &[f64], o: &[usize]) -> Result<f64> {
    let inst = &data::tables()?.sms;
    check(x, o, 6)?;
    let cost = weighted_completion(x, &inst.weights, &alpha_from_o(o)?);
    Ok(inst.revenue * x.iter().sum::<f64>() - cost)
}

/// Traveling-salesman profit with stay times `x` (days, per city) and visit
/// positions `o`.
pub fn tsp_profit(x: &[f64], o: &[usize]) -> Result<f64> {
    let inst = &data::tables()?.tsp;
    tsp_profit_with(inst, x, o)
}

pub fn tsp_profit_with(inst: &TspInstance, x: &[f64], o: &[usize]) -> Result<f64> {
    let k = inst.due.len();
    check(x, o, k)?;
    let mut prev = 0;
    let mut c = 0.0;
    let mut tardiness = 0.0;
    for city in alpha_from_o(o)? {
        c += inst.s[prev][city - 1] + x[city - 1];
        tardiness += (c - inst.due[city - 1]).max(0.0);
        prev = city;
    }
    Ok(k as f64 * inst.a + inst.e * x.iter().sum::<f64>() - inst.b * c - inst.f * tardiness)
}

/// Tabulated lymphoma response for dose levels of A and B and the orders of
/// A, B and C.
pub fn drug_lookup(x_a: u8, o_a: usize, x_b: u8, o_b: usize, o_c: usize) -> Result<f64> {
    data::tables()?
        .drug
        .iter()
        .find(|r| r.x_a == x_a && r.x_b == x_b && r.o == [o_a, o_b, o_c])
        .map(|r| r.y)
        .ok_or_else(|| Error::Oracle(format!("setting ({x_a},{o_a},{x_b},{o_b},{o_c}) is not tabulated")))
}

pub struct FourOps;

impl Oracle for FourOps {
    fn name(&self) -> String {
        "four_ops".into()
    }
    fn k(&self) -> usize {
        4
    }
    fn bounds(&self) -> Bounds {
        Bounds::unit(4)
    }
    fn direction(&self) -> Direction {
        Direction::Maximize
    }
    fn evaluate(&self, w: &QSPoint) -> Result<f64> {
        four_ops(&w.x, &w.o)
    }
}

/// Order-only scheduling cost; x is pinned at the processing times.
pub struct SmsCost;

impl Oracle for SmsCost {
    fn name(&self) -> String {
        "sms".into()
    }
    fn k(&self) -> usize {
        6
    }
    fn bounds(&self) -> Bounds {
        Bounds::unit(6)
    }
    fn direction(&self) -> Direction {
        Direction::Minimize
    }
    fn evaluate(&self, w: &QSPoint) -> Result<f64> {
        sms_cost(&w.o)
    }
    fn fixed_x(&self) -> Option<Vec<f64>> {
        data::tables().ok().map(|t| t.sms.processing.clone())
    }
}

pub struct SmsProfit;

impl Oracle for SmsProfit {
    fn name(&self) -> String {
        "sms_profit".into()
    }
    fn k(&self) -> usize {
        6
    }
    fn bounds(&self) -> Bounds {
        Bounds::unit(6)
    }
    fn direction(&self) -> Direction {
        Direction::Maximize
    }
    fn evaluate(&self, w: &QSPoint) -> Result<f64> {
        sms_profit(&w.x, &w.o)
    }
}

pub struct TspProfit;

impl Oracle for TspProfit {
    fn name(&self) -> String {
        "tsp".into()
    }
    fn k(&self) -> usize {
        8
    }
    fn bounds(&self) -> Bounds {
        Bounds::uniform(8, 1.0, 4.0).expect("static bounds")
    }
    fn direction(&self) -> Direction {
        Direction::Maximize
    }
    fn evaluate(&self, w: &QSPoint) -> Result<f64> {
        tsp_profit(&w.x, &w.o)
    }
}

/// The 24 tabulated drug settings. Points use x = (dose A, dose B, 0).
pub struct DrugLookup;

impl DrugLookup {
    pub fn point(row: &DrugRow) -> QSPoint {
        QSPoint { x: vec![row.x_a as f64, row.x_b as f64, 0.0], o: row.o.to_vec() }
    }
}

fn level(v: f64) -> Result<u8> {
    if v.abs() < 1e-9 {
        Ok(0)
    } else if (v - 1.0).abs() < 1e-9 {
        Ok(1)
    } else {
        Err(Error::Oracle(format!("dose level {v} is not 0 or 1")))
    }
}

impl Oracle for DrugLookup {
    fn name(&self) -> String {
        "drug".into()
    }
    fn k(&self) -> usize {
        3
    }
    fn bounds(&self) -> Bounds {
        Bounds::unit(3)
    }
    fn direction(&self) -> Direction {
        Direction::Maximize
    }
    fn evaluate(&self, w: &QSPoint) -> Result<f64> {
        check(&w.x, &w.o, 3)?;
        if level(w.x[2])? != 0 {
            return Err(Error::Oracle("drug C has a single dose (x_3 must be 0)".into()));
        }
        drug_lookup(level(w.x[0])?, w.o[0], level(w.x[1])?, w.o[1], w.o[2])
    }
    fn candidates(&self) -> Option<Vec<QSPoint>> {
        data::tables().ok().map(|t| t.drug.iter().map(DrugLookup::point).collect())
    }
}

pub const BUILTIN_NAMES: [&str; 5] = ["four_ops", "sms", "sms_profit", "tsp", "drug"];

pub fn builtin(name: &str) -> Result<Box<dyn Oracle>> {
    Ok(match name {
        "four_ops" => Box::new(FourOps),
        "sms" | "sms_cost" => Box::new(SmsCost),
        "sms_profit" => Box::new(SmsProfit),
        "tsp" | "tsp_profit" => Box::new(TspProfit),
        "drug" | "drug_lookup" => Box::new(DrugLookup),
        _ => return invalid(format!("unknown builtin oracle '{name}' (known: {})", BUILTIN_NAMES.join(", "))),
    })
}
