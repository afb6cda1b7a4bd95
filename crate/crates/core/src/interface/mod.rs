//! Run configuration, oracle specs, report files and the HTTP ask-tell service.

pub mod service;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::acquisition::{Direction, EgoConfig};
use crate::error::{invalid, Result};
use crate::learner::{Campaign, CampaignConfig, DesignConfig, Source, Status};
use crate::magp::FitConfig;
use crate::oracles::{builtin, ExecOracle, Oracle, BUILTIN_NAMES};
use crate::qscore::Bounds;

/// Formats with six significant digits, dropping trailing zeros.
pub fn fmt6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (m, e) = sci.split_once('e').expect("exponent");
    let e: i32 = e.parse().expect("exponent digits");
    if (-5..6).contains(&e) {
        trim_zeros(&format!("{:.*}", (5 - e) as usize, v)).to_string()
    } else {
        format!("{}e{e}", trim_zeros(m))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `builtin:<name>` or `exec:<command>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleSpec {
    Builtin(String),
    Exec(String),
}

impl std::str::FromStr for OracleSpec {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(name) = s.strip_prefix("builtin:") {
            if !BUILTIN_NAMES.contains(&name) {
                return invalid(format!("unknown builtin oracle {name:?}; expected one of {}", BUILTIN_NAMES.join(", ")));
            }
            Ok(OracleSpec::Builtin(name.into()))
        } else if let Some(cmd) = s.strip_prefix("exec:") {
            if cmd.trim().is_empty() {
                return invalid("exec oracle needs a command");
            }
            Ok(OracleSpec::Exec(cmd.into()))
        } else {
            invalid(format!("oracle spec {s:?} must start with builtin: or exec:"))
        }
    }
}

/// Configuration file for `optimize`; command-line flags override it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub oracle: Option<String>,
    /// Required for exec oracles.
    pub k: Option<usize>,
    pub bounds: Option<Bounds>,
    pub direction: Option<Direction>,
    pub t: Option<usize>,
    pub design_size: Option<usize>,
    pub max_runs: Option<usize>,
    pub max_seconds: Option<f64>,
    pub alpha: Option<f64>,
    pub stop_on_ei: Option<bool>,
    pub seed: Option<u64>,
    pub fast: Option<bool>,
    /// Per-evaluation timeout of exec oracles.
    pub timeout_seconds: Option<f64>,
    pub parallel_safe: Option<bool>,
    pub fit: Option<FitConfig>,
    pub ego: Option<EgoConfig>,
    pub design: Option<DesignConfig>,
    pub out_dir: Option<PathBuf>,
    pub state: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn oracle(&self) -> Result<Box<dyn Oracle>> {
        let spec: OracleSpec = self.oracle.as_deref().ok_or_else(|| crate::Error::Invalid("no oracle given".into()))?.parse()?;
        match spec {
            OracleSpec::Builtin(name) => builtin(&name),
            OracleSpec::Exec(cmd) => {
                let bounds = match (&self.bounds, self.k) {
                    (Some(b), _) => b.clone(),
                    (None, Some(k)) => Bounds::unit(k),
                    (None, None) => return invalid("exec oracles need k or bounds"),
                };
                if self.k.is_some_and(|k| k != bounds.k()) {
                    return invalid("k and bounds disagree");
                }
                let timeout = self.timeout_seconds.unwrap_or(3600.0);
                if !(timeout > 0.0 && timeout.is_finite()) {
                    return invalid("timeout_seconds must be positive");
                }
                let mut o = ExecOracle::new(cmd, bounds, self.direction.unwrap_or(Direction::Minimize), Duration::from_secs_f64(timeout));
                o.parallel_safe = self.parallel_safe.unwrap_or(false);
                Ok(Box::new(o))
            }
        }
    }

    /// Campaign settings for an ask-tell campaign, where responses are
    /// supplied by hand. Without an oracle spec, `k` (or `bounds`) and
    /// `direction` describe the experiment.
    pub fn ask_tell(&self) -> Result<CampaignConfig> {
        if self.oracle.is_some() {
            return self.campaign(self.oracle()?.as_ref());
        }
        let bounds = match (&self.bounds, self.k) {
            (Some(b), _) => b.clone(),
            (None, Some(k)) => Bounds::unit(k),
            (None, None) => return invalid("give an oracle, k or bounds"),
        };
        let direction = self.direction.ok_or_else(|| crate::Error::Invalid("give a direction".into()))?;
        self.campaign(&Manual { bounds, direction })
    }

    /// Campaign settings for `oracle`, with unspecified values defaulted.
    pub fn campaign(&self, oracle: &dyn Oracle) -> Result<CampaignConfig> {
        let k = oracle.k();
        let design_size = self.design_size.unwrap_or_else(|| default_design_size(&oracle.name(), k));
        let max_runs = self.max_runs.unwrap_or(design_size + 10 * k);
        let mut c = CampaignConfig::for_oracle(oracle, design_size, max_runs, self.seed.unwrap_or(0));
        if let Some(b) = &self.bounds {
            c.bounds = b.clone();
        }
        if let Some(d) = self.direction {
            c.direction = d;
        }
        if let Some(f) = &self.fit {
            c.fit = f.clone();
        }
        if let Some(t) = self.t {
            c.fit.t = t;
        }
        if let Some(e) = &self.ego {
            c.ego = e.clone();
        }
        if let Some(d) = &self.design {
            c.design = d.clone();
        }
        if let Some(a) = self.alpha {
            c.alpha = a;
        }
        if let Some(s) = self.stop_on_ei {
            c.stop_on_ei = s;
        }
        c.max_seconds = self.max_seconds;
        c.fast = self.fast.unwrap_or(false);
        c.validate()?;
        Ok(c)
    }
}

struct Manual {
    bounds: Bounds,
    direction: Direction,
}

impl Oracle for Manual {
    fn name(&self) -> String {
        "manual".into()
    }
    fn k(&self) -> usize {
        self.bounds.k()
    }
    fn bounds(&self) -> Bounds {
        self.bounds.clone()
    }
    fn direction(&self) -> Direction {
        self.direction
    }
    fn evaluate(&self, _: &crate::qscore::QSPoint) -> Result<f64> {
        Err(crate::Error::Oracle("responses of this campaign are entered by hand".into()))
    }
}

/// Initial design size when none is given: the drug and scheduling studies
/// use 8 and 15 runs, otherwise 2 + k(k+3)/2.
pub fn default_design_size(oracle_name: &str, k: usize) -> usize {
    match oracle_name {
        "drug" => 8,
        "sms" | "sms_profit" => 15,
        _ => 2 + k * (k + 3) / 2,
    }
}

/// Files written by `optimize`: history, EI trace, cumulative-best summary
/// and a JSON report. Returns the report.
pub fn write_outputs(c: &Campaign, dir: &Path) -> Result<Report> {
    fs::create_dir_all(dir)?;
    c.write_history_csv(fs::File::create(dir.join("history.csv"))?)?;

    let mut w = csv::Writer::from_path(dir.join("ei_trace.csv"))?;
    w.write_record(["proposal", "run", "ei"])?;
    let seq: Vec<usize> = c.history.iter().enumerate().filter(|(_, o)| o.source == Source::Sequential).map(|(i, _)| i + 1).collect();
    for (j, (e, run)) in c.ei_trace.iter().zip(&seq).enumerate() {
        w.write_record([(j + 1).to_string(), run.to_string(), e.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(["run", "source", "y", "best"])?;
    for (i, (o, b)) in c.history.iter().zip(c.cumulative_best()).enumerate() {
        let src = match o.source {
            Source::Initial => "initial",
            Source::Sequential => "sequential",
            Source::Manual => "manual",
        };
        w.write_record([(i + 1).to_string(), src.into(), o.y.to_string(), b.to_string()])?;
    }
    w.flush()?;

    let r = Report::new(c);
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&r)?)?;
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub status: Status,
    pub runs: usize,
    pub initial: usize,
    pub sequential: usize,
    pub refits: usize,
    pub sm_updates: usize,
    pub best: Option<f64>,
    pub best_x: Option<Vec<f64>>,
    pub best_o: Option<Vec<usize>>,
}

impl Report {
    pub fn new(c: &Campaign) -> Self {
        Report {
            id: c.id.clone(),
            status: c.status,
            runs: c.n(),
            initial: c.counters.initial,
            sequential: c.counters.sequential,
            refits: c.counters.refits,
            sm_updates: c.counters.sm_updates,
            best: c.incumbent.as_ref().map(|i| i.y),
            best_x: c.incumbent.as_ref().map(|i| i.point.x.clone()),
            best_o: c.incumbent.as_ref().map(|i| i.point.o.clone()),
        }
    }

    /// Human-readable summary with six significant digits.
    pub fn text(&self) -> String {
        let status = match self.status {
            Status::Active => "active".to_string(),
            Status::Stopped { reason } => format!("stopped ({})", format!("{reason:?}").to_lowercase()),
        };
        let mut s = format!(
            "campaign {}: {status}\nruns {} (initial {}, sequential {}), refits {}, rank-one updates {}\n",
            self.id, self.runs, self.initial, self.sequential, self.refits, self.sm_updates
        );
        if let (Some(b), Some(x), Some(o)) = (self.best, &self.best_x, &self.best_o) {
            let xs: Vec<String> = x.iter().map(|v| fmt6(*v)).collect();
            let os: Vec<String> = o.iter().map(|v| v.to_string()).collect();
            s += &format!("best y = {}\n  x = ({})\n  o = ({})\n", fmt6(b), xs.join(", "), os.join(", "));
        }
        s
    }
}
