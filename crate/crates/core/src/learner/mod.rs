//! Sequential QS-learning loop and persistent ask-tell campaigns.

mod fast;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{expected_improvement, propose_next, Direction, EgoConfig};
use crate::error::{invalid, Error, Result};
use crate::initdesign::{assemble_qs_design, select_candidate_subset, CpParams, DesignBudget, NuPParams};
use crate::magp::{fit, FitConfig, MaGPModel, ModelSnapshot, Prediction};
use crate::oracles::Oracle;
use crate::qscore::{check_perm, write_runs, Bounds, QSPoint, Run};

pub use fast::{fast_batch_size, sm_update, FastState, SM_TOLERANCE};

pub const SCHEMA_VERSION: u32 = 1;

/// True when the last three EIs are each at most `alpha * |incumbent|`.
pub fn should_stop(ei_trace: &[f64], incumbent_magnitude: f64, alpha: f64) -> bool {
    let n = ei_trace.len();
    if n < 3 {
        return false;
    }
    let tol = alpha * incumbent_magnitude.abs().max(1e-12);
    ei_trace[n - 3..].iter().all(|&e| e <= tol)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub nu: NuPParams,
    pub cp: CpParams,
    pub budget: DesignBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub k: usize,
    /// Raw-scale bounds of the quantities.
    pub bounds: Bounds,
    pub direction: Direction,
    pub design_size: usize,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub ego: EgoConfig,
    #[serde(default)]
    pub design: DesignConfig,
    /// Outer stopping threshold.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "yes")]
    pub stop_on_ei: bool,
    /// Total evaluations N, initial design included.
    pub max_runs: usize,
    /// Wall-clock budget T in seconds.
    #[serde(default)]
    pub max_seconds: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Fixed-parameter batches between refits.
    #[serde(default)]
    pub fast: bool,
    /// Raw quantities held fixed; only orders are searched.
    #[serde(default)]
    pub fixed_x: Option<Vec<f64>>,
    /// Finite list of raw-scale settings; proposals are restricted to it.
    #[serde(default)]
    pub candidates: Option<Vec<QSPoint>>,
}

fn default_alpha() -> f64 {
    0.01
}

fn yes() -> bool {
    true
}

impl CampaignConfig {
    /// Defaults for an oracle: its bounds, direction, fixed quantities and candidates.
    pub fn for_oracle(oracle: &dyn Oracle, design_size: usize, max_runs: usize, seed: u64) -> Self {
        CampaignConfig {
            k: oracle.k(),
            bounds: oracle.bounds(),
            direction: oracle.direction(),
            design_size,
            // t = 2 unless k is too small for it
            fit: FitConfig { t: FitConfig::default().t.min(oracle.k().saturating_sub(1)).max(1), ..FitConfig::default() },
            ego: EgoConfig::default(),
            design: DesignConfig::default(),
            alpha: default_alpha(),
            stop_on_ei: true,
            max_runs,
            max_seconds: None,
            seed,
            fast: false,
            fixed_x: oracle.fixed_x(),
            candidates: oracle.candidates(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return invalid("k must be at least 2");
        }
        self.bounds.validate()?;
        if self.bounds.k() != self.k {
            return invalid("bounds length must equal k");
        }
        self.fit.validate(self.k)?;
        self.ego.validate()?;
        self.design.nu.validate()?;
        self.design.cp.validate()?;
        if !(0.001..=0.01).contains(&self.alpha) {
            return invalid("alpha must lie in [0.001, 0.01]");
        }
        if self.design_size < 2 {
            return invalid("design_size must be at least 2");
        }
        if self.max_runs < self.design_size {
            return invalid("max_runs must be at least design_size");
        }
        if let Some(t) = self.max_seconds {
            if !(t > 0.0) {
                return invalid("max_seconds must be positive");
            }
        }
        if self.fast && self.max_seconds.is_none() {
            return invalid("fast mode needs max_seconds");
        }
        if let Some(x) = &self.fixed_x {
            if x.len() != self.k || x.iter().zip(&self.bounds.lower).zip(&self.bounds.upper).any(|((v, l), u)| !(v >= l && v <= u)) {
                return invalid("fixed_x must have k entries within bounds");
            }
        }
        if let Some(c) = &self.candidates {
            if c.len() < self.design_size {
                return invalid("fewer candidates than design_size");
            }
            for w in c {
                if w.k() != self.k {
                    return invalid("candidate dimension does not match k");
                }
                check_perm(&w.o)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Initial,
    Sequential,
    Manual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub point: QSPoint,
    pub y: f64,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonce: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    /// Raw-scale x.
    pub point: QSPoint,
    pub source: Source,
    pub ei: Option<f64>,
    pub prediction: Option<Prediction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    Budget,
    Time,
    Exhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Status {
    Active,
    Stopped { reason: StopReason },
}

impl Status {
    pub fn is_active(&self) -> bool {
        matches!(self, Status::Active)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub y: f64,
    pub point: QSPoint,
    pub index: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub evaluations: usize,
    pub initial: usize,
    pub sequential: usize,
    pub manual: usize,
    pub refits: usize,
    pub refit_failures: usize,
    pub sm_updates: usize,
}

/// Fast-mode bookkeeping.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FastBook {
    /// Observations left before the next refit.
    pub fixed_left: usize,
    pub last_fit_seconds: f64,
    pub batch_sizes: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Campaign {
    pub schema_version: u32,
    pub id: String,
    pub config: CampaignConfig,
    /// Initial design rows, raw scale.
    pub design: Vec<QSPoint>,
    pub history: Vec<Observation>,
    pub incumbent: Option<Incumbent>,
    pub ei_trace: Vec<f64>,
    pub model: Option<ModelSnapshot>,
    pub pending: Option<Suggestion>,
    pub counters: Counters,
    pub fast: FastBook,
    pub status: Status,
    pub started_unix: f64,
    #[serde(skip)]
    cache: Option<MaGPModel>,
    #[serde(skip)]
    fast_state: Option<FastState>,
    #[serde(skip)]
    path: Option<PathBuf>,
}

/// Hyperparameters and latent order-position coordinates for display.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub k: usize,
    pub t: usize,
    pub n: usize,
    pub mu: f64,
    pub sigma2: Vec<f64>,
    pub theta: Vec<f64>,
    pub tau2: f64,
    pub jitter: f64,
    pub nll: Option<f64>,
    pub latent: Vec<Vec<f64>>,
}

/// A run aborted by an error, with the state reached so far.
#[derive(Debug)]
pub struct Aborted {
    pub campaign: Box<Campaign>,
    pub error: Error,
}

impl std::fmt::Display for Aborted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "campaign {} aborted after {} runs: {}", self.campaign.id, self.campaign.history.len(), self.error)
    }
}

impl std::error::Error for Aborted {}

fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn mix(seed: u64, n: usize, salt: u64) -> u64 {
    seed ^ (n as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn same_point(a: &QSPoint, b: &QSPoint) -> bool {
    a.o == b.o && a.x.len() == b.x.len() && a.x.iter().zip(&b.x).all(|(u, v)| (u - v).abs() <= 1e-9 * u.abs().max(v.abs()).max(1.0))
}

impl Campaign {
    /// Validates the configuration and builds the initial design.
    pub fn new(id: impl Into<String>, config: CampaignConfig) -> Result<Self> {
        config.validate()?;
        let b = &config.bounds;
        let design = match &config.candidates {
            Some(cands) => {
                let unit: Vec<QSPoint> = cands.iter().map(|w| QSPoint { x: b.to_unit(&w.x), o: w.o.clone() }).collect();
                let idx = select_candidate_subset(&unit, config.design_size, &config.design.cp, &config.design.budget.sequence, config.seed)?;
                idx.into_iter().map(|i| cands[i].clone()).collect()
            }
            None => {
                let d = assemble_qs_design(config.design_size, config.k, &config.design.nu, &config.design.cp, &config.design.budget, config.seed)?;
                d.points()
                    .into_iter()
                    .map(|w| QSPoint { x: config.fixed_x.clone().unwrap_or_else(|| b.to_raw(&w.x)), o: w.o })
                    .collect()
            }
        };
        Ok(Campaign {
            schema_version: SCHEMA_VERSION,
            id: id.into(),
            config,
            design,
            history: Vec::new(),
            incumbent: None,
            ei_trace: Vec::new(),
            model: None,
            pending: None,
            counters: Counters::default(),
            fast: FastBook::default(),
            status: Status::Active,
            started_unix: now_unix(),
            cache: None,
            fast_state: None,
            path: None,
        })
    }

    /// Persist to `path` after every mutation.
    pub fn attach(&mut self, path: impl Into<PathBuf>) -> Result<()> {
        let p = path.into();
        self.path = Some(p);
        self.persist()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn elapsed_seconds(&self) -> f64 {
        (now_unix() - self.started_unix).max(0.0)
    }

    fn persist(&self) -> Result<()> {
        match &self.path {
            Some(p) => self.save(p),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Campaign = serde_json::from_str(text)?;
        if c.schema_version != SCHEMA_VERSION {
            return invalid(format!("unsupported campaign schema version {}", c.schema_version));
        }
        c.config.validate()?;
        Ok(c)
    }

    /// Writes a temporary sibling file, syncs it, then renames it over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Loads a state file and keeps persisting to it.
    pub fn load(path: &Path) -> Result<Self> {
        let mut c = Self::from_json(&fs::read_to_string(path)?)?;
        c.path = Some(path.to_path_buf());
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.history.len()
    }

    pub fn is_active(&self) -> bool {
        self.status.is_active()
    }

    fn initial_done(&self) -> usize {
        self.history.iter().filter(|o| o.source == Source::Initial).count()
    }

    fn unit(&self, w: &QSPoint) -> QSPoint {
        QSPoint { x: self.config.bounds.to_unit(&w.x), o: w.o.clone() }
    }

    fn training(&self) -> (Vec<QSPoint>, Vec<f64>) {
        (self.history.iter().map(|o| self.unit(&o.point)).collect(), self.history.iter().map(|o| o.y).collect())
    }

    /// The current surrogate, rebuilt from the snapshot when needed.
    pub fn current_model(&mut self) -> Result<&MaGPModel> {
        if self.cache.is_none() {
            let snap = self.model.as_ref().ok_or(Error::NotFitted)?;
            self.cache = Some(MaGPModel::from_snapshot(snap)?);
        }
        Ok(self.cache.as_ref().expect("cached model"))
    }

    pub fn model_summary(&mut self) -> Result<ModelSummary> {
        let m = self.current_model()?;
        let p = m.params();
        Ok(ModelSummary {
            k: m.k(),
            t: m.t(),
            n: m.posterior().n(),
            mu: m.mu_hat(),
            sigma2: p.sigma2.clone(),
            theta: p.theta.clone(),
            tau2: p.tau2,
            jitter: m.jitter(),
            nll: m.nll().is_finite().then(|| m.nll()),
            latent: m.latent_coordinates(),
        })
    }

    /// Next run to perform; repeated calls return the same suggestion until
    /// an observation arrives.
    pub fn suggest(&mut self) -> Result<Suggestion> {
        if let Status::Stopped { reason } = self.status {
            return Err(Error::Stopped(format!("{reason:?}").to_lowercase()));
        }
        if let Some(s) = &self.pending {
            return Ok(s.clone());
        }
        let i = self.initial_done();
        let s = if i < self.design.len() {
            Suggestion { point: self.design[i].clone(), source: Source::Initial, ei: None, prediction: None }
        } else {
            self.propose()?
        };
        self.pending = Some(s.clone());
        self.persist()?;
        Ok(s)
    }

    fn propose(&mut self) -> Result<Suggestion> {
        let direction = self.config.direction;
        let incumbent = self.incumbent.as_ref().ok_or(Error::NotFitted)?.y;
        let n = self.n();
        self.current_model()?;
        let model = self.cache.as_ref().expect("cached model");
        let post = model.posterior();
        let b = &self.config.bounds;
        if let Some(cands) = &self.config.candidates {
            let mut best: Option<(usize, f64)> = None;
            for (i, c) in cands.iter().enumerate() {
                if self.history.iter().any(|o| same_point(&o.point, c)) {
                    continue;
                }
                let ei = expected_improvement(post, &QSPoint { x: b.to_unit(&c.x), o: c.o.clone() }, incumbent, direction);
                if best.is_none_or(|(_, e)| ei > e) {
                    best = Some((i, ei));
                }
            }
            let (i, ei) = best.ok_or_else(|| Error::Stopped("all candidates visited".into()))?;
            let w = &cands[i];
            let prediction = post.predict(&QSPoint { x: b.to_unit(&w.x), o: w.o.clone() });
            return Ok(Suggestion { point: w.clone(), source: Source::Sequential, ei: Some(ei), prediction: Some(prediction) });
        }
        let mut ego = self.config.ego.clone();
        ego.seed = mix(self.config.seed, n, 2);
        ego.fixed_x = self.config.fixed_x.as_ref().map(|x| b.to_unit(x));
        let p = propose_next(post, incumbent, direction, &ego);
        let mut x = b.to_raw(&p.point.x);
        if let Some(fx) = &self.config.fixed_x {
            x = fx.clone();
        }
        Ok(Suggestion { point: QSPoint { x, o: p.point.o }, source: Source::Sequential, ei: Some(p.ei), prediction: Some(p.prediction) })
    }

    /// Records a response. The point must be the pending suggestion unless
    /// `manual` is set. A repeated nonce is ignored; returns whether the
    /// observation was appended.
    pub fn observe(&mut self, point: &QSPoint, y: f64, nonce: Option<&str>, manual: bool) -> Result<bool> {
        if let Some(nc) = nonce {
            if self.history.iter().any(|o| o.nonce.as_deref() == Some(nc)) {
                return Ok(false);
            }
        }
        if let Status::Stopped { reason } = self.status {
            return Err(Error::Stopped(format!("{reason:?}").to_lowercase()));
        }
        if !y.is_finite() {
            return invalid("response must be finite");
        }
        if point.k() != self.config.k {
            return invalid("point dimension does not match the campaign");
        }
        check_perm(&point.o)?;
        let pending = self.pending.as_ref().filter(|s| same_point(&s.point, point)).cloned();
        let source = match (&pending, manual) {
            (Some(s), false) => s.source,
            (_, true) => Source::Manual,
            (None, false) => return invalid("point is not the pending suggestion; flag it as manual"),
        };
        let point = pending.as_ref().filter(|_| !manual).map(|s| s.point.clone()).unwrap_or_else(|| point.clone());
        if source == Source::Sequential {
            self.ei_trace.push(pending.as_ref().and_then(|s| s.ei).unwrap_or(0.0));
        }
        self.pending = None;
        self.history.push(Observation { point: point.clone(), y, source, nonce: nonce.map(str::to_owned) });
        self.counters.evaluations += 1;
        match source {
            Source::Initial => self.counters.initial += 1,
            Source::Sequential => self.counters.sequential += 1,
            Source::Manual => self.counters.manual += 1,
        }
        let better = self.incumbent.as_ref().is_none_or(|inc| self.config.direction.better(y, inc.y));
        if better {
            self.incumbent = Some(Incumbent { y, point, index: self.history.len() - 1 });
        }

        if self.initial_done() >= self.design.len() && self.n() >= 2 {
            self.update_model(y)?;
        }
        self.update_status(source);
        self.persist()?;
        Ok(true)
    }

    fn update_model(&mut self, y: f64) -> Result<()> {
        let have_model = self.model.is_some();
        if !self.config.fast || !have_model {
            return self.refit();
        }
        if self.fast.fixed_left > 1 {
            self.fast.fixed_left -= 1;
            return self.sm_step(y);
        }
        let t_total = self.config.max_seconds.unwrap_or(f64::INFINITY);
        if self.elapsed_seconds() > 0.95 * t_total {
            // Parameters stay frozen for the rest of the campaign.
            self.fast.fixed_left = usize::MAX;
            return self.sm_step(y);
        }
        self.refit()
    }

    fn sm_step(&mut self, y: f64) -> Result<()> {
        if self.fast_state.is_none() {
            let m = self.current_model()?.clone();
            self.fast_state = Some(FastState::from_model(&m));
        }
        let st = self.fast_state.take().expect("fast state");
        let w = self.unit(&self.history.last().expect("observation").point);
        let m = match sm_update(st, w, y) {
            Ok(st) => {
                self.counters.sm_updates += 1;
                let m = st.model();
                self.fast_state = Some(st);
                m
            }
            Err(e) => {
                log::warn!("rank-one update refused ({e}); refactorizing");
                let prev = self.current_model()?.params().clone();
                let (pts, ys) = self.training();
                let m = MaGPModel::from_params(pts, ys, prev, self.config.bounds.clone(), true, self.config.fit.jitter)?;
                self.fast_state = Some(FastState::from_model(&m));
                m
            }
        };
        self.model = Some(m.snapshot());
        self.cache = Some(m);
        Ok(())
    }

    fn refit(&mut self) -> Result<()> {
        let (pts, ys) = self.training();
        let mut cfg = self.config.fit.clone();
        cfg.seed = mix(self.config.seed, self.n(), 1);
        let start = Instant::now();
        let fitted = fit(&pts, &ys, &self.config.bounds, &cfg);
        let seconds = start.elapsed().as_secs_f64();
        let m = match fitted {
            Ok(m) => {
                self.counters.refits += 1;
                m
            }
            Err(e) => {
                self.counters.refit_failures += 1;
                let prev = match self.current_model() {
                    Ok(m) => m.params().clone(),
                    Err(_) => return Err(e),
                };
                log::warn!("refit failed ({e}); keeping previous hyperparameters");
                MaGPModel::from_params(pts, ys, prev, self.config.bounds.clone(), true, cfg.jitter)?
            }
        };
        if self.config.fast {
            let n_left = self.config.max_runs.saturating_sub(self.n());
            let t_left = self.config.max_seconds.unwrap_or(f64::INFINITY) - self.elapsed_seconds();
            let b = fast_batch_size(n_left, seconds, t_left).max(1);
            self.fast.fixed_left = b;
            self.fast.last_fit_seconds = seconds;
            self.fast.batch_sizes.push(b);
            self.fast_state = Some(FastState::from_model(&m));
        }
        self.model = Some(m.snapshot());
        self.cache = Some(m);
        Ok(())
    }

    fn update_status(&mut self, source: Source) {
        let reason = if self.config.stop_on_ei
            && source == Source::Sequential
            && should_stop(&self.ei_trace, self.incumbent.as_ref().map_or(0.0, |i| i.y.abs()), self.config.alpha)
        {
            Some(StopReason::Converged)
        } else if self
            .config
            .candidates
            .as_ref()
            .is_some_and(|c| c.iter().all(|w| self.history.iter().any(|o| same_point(&o.point, w))))
        {
            Some(StopReason::Exhausted)
        } else if self.n() >= self.config.max_runs {
            Some(StopReason::Budget)
        } else if self.config.max_seconds.is_some_and(|t| self.elapsed_seconds() >= t) && self.initial_done() >= self.design.len() {
            Some(StopReason::Time)
        } else {
            None
        };
        if let Some(reason) = reason {
            self.status = Status::Stopped { reason };
            self.pending = None;
        }
    }

    /// History in the shared CSV run format (raw x).
    pub fn history_runs(&self) -> Vec<Run> {
        self.history.iter().map(|o| Run { x: o.point.x.clone(), o: o.point.o.clone(), y: Some(o.y) }).collect()
    }

    pub fn write_history_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        write_runs(w, self.config.k, &self.history_runs())
    }

    /// Appends completed runs as manual observations.
    pub fn import_runs(&mut self, runs: &[Run]) -> Result<usize> {
        let mut added = 0;
        for r in runs {
            let y = r.y.ok_or_else(|| Error::Invalid("imported run has no response".into()))?;
            let w = QSPoint::new(r.x.clone(), r.o.clone())?;
            if self.observe(&w, y, None, true)? {
                added += 1;
            }
        }
        Ok(added)
    }

    /// Best response after each run.
    pub fn cumulative_best(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.history.len());
        for o in &self.history {
            let v = match out.last() {
                Some(&b) if !self.config.direction.better(o.y, b) => b,
                _ => o.y,
            };
            out.push(v);
        }
        out
    }
}

/// Evaluates the initial design (in parallel for pure oracles), then
/// alternates proposals and evaluations until a stopping rule fires.
/// With `state` the campaign file is rewritten after every observation.
pub fn run_campaign(
    oracle: &dyn Oracle,
    id: &str,
    config: CampaignConfig,
    state: Option<&Path>,
) -> std::result::Result<Campaign, Aborted> {
    if oracle.k() != config.k {
        let error = Error::Invalid("oracle dimension does not match k".into());
        return Err(Aborted { campaign: Box::new(empty_campaign(id, config)), error });
    }
    let mut c = Campaign::new(id, config.clone()).map_err(|error| Aborted { campaign: Box::new(empty_campaign(id, config)), error })?;
    macro_rules! check {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => return Err(Aborted { campaign: Box::new(c), error }),
            }
        };
    }
    if let Some(p) = state {
        check!(c.attach(p));
    }
    if oracle.is_pure() {
        let ys: Vec<Result<f64>> = c.design.par_iter().map(|w| oracle.evaluate(w)).collect();
        for y in ys {
            let s = check!(c.suggest());
            let y = check!(y);
            check!(c.observe(&s.point, y, None, false));
        }
    }
    while c.is_active() {
        let s = check!(c.suggest());
        let y = check!(oracle.evaluate(&s.point));
        check!(c.observe(&s.point, y, None, false));
    }
    Ok(c)
}

/// `run_campaign` with fixed-parameter batches between refits.
pub fn run_fast_campaign(
    oracle: &dyn Oracle,
    id: &str,
    mut config: CampaignConfig,
    state: Option<&Path>,
) -> std::result::Result<Campaign, Aborted> {
    config.fast = true;
    run_campaign(oracle, id, config, state)
}

fn empty_campaign(id: &str, config: CampaignConfig) -> Campaign {
    Campaign {
        schema_version: SCHEMA_VERSION,
        id: id.into(),
        config,
        design: vec![],
        history: vec![],
        incumbent: None,
        ei_trace: vec![],
        model: None,
        pending: None,
        counters: Counters::default(),
        fast: FastBook::default(),
        status: Status::Active,
        started_unix: now_unix(),
        cache: None,
        fast_state: None,
        path: None,
    }
}

#[cfg(test)]
mod tests;
