//! Streaming predictors behind one protocol.
//!
//! Each round `t` a predictor answers any number of [`Predictor::predict`]
//! calls, then receives the true score through [`Predictor::update`], which
//! closes the round and returns one [`PredictorRecord`] per prediction made.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::belief::{
    discount_lambda, DiscountedBelief, ExactBelief, Grid, QuantizedBelief, Schedule,
};
use crate::error::{Error, Result};
use crate::types::{order_index, quantile_loss, ConfidenceLevel, Prior};

/// Router grid size used when none is configured.
pub const DEFAULT_ROUTER_SIZE: usize = 21;

/// Version tag written into predictor snapshots.
pub const SNAPSHOT_VERSION: u32 = 1;

/// One answered query, scored once the true score is revealed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorRecord {
    pub t: u64,
    pub alpha: f64,
    pub threshold: f64,
    pub r_star: f64,
    pub loss: f64,
    pub covered: bool,
}

impl PredictorRecord {
    pub fn new(t: u64, alpha: f64, threshold: f64, r_star: f64) -> Self {
        Self {
            t,
            alpha,
            threshold,
            r_star,
            loss: quantile_loss(alpha, threshold, r_star),
            covered: r_star <= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Bayesian,
    Quantized,
    Discounted,
    Erm,
    Ogd,
    MultiOgd,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Bayesian => "bayesian",
            Algorithm::Quantized => "quantized",
            Algorithm::Discounted => "discounted",
            Algorithm::Erm => "erm",
            Algorithm::Ogd => "ogd",
            Algorithm::MultiOgd => "multi_ogd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::InvalidConfig(format!("unknown algorithm '{s}'")))
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_upper() -> f64 {
    1.0
}

/// JSON-configurable predictor description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorConfig {
    pub algorithm: Algorithm,
    #[serde(rename = "R", default = "default_upper")]
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Prior>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    /// Score-grid size for the quantized and discounted engines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    /// Confidence-level grid size for MultiOGD.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub router_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_scale: Option<f64>,
}

impl PredictorConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            upper: 1.0,
            name: None,
            prior: None,
            schedule: None,
            grid_size: None,
            router_size: None,
            beta: None,
            eta_scale: None,
        }
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.algorithm.as_str().to_owned())
    }

    /// Builds a fresh predictor. `horizon` supplies the default grid size
    /// `ceil(sqrt(T))` when `grid_size` is unset.
    pub fn build(&self, horizon: Option<u64>) -> Result<Predictor> {
        let prior = match &self.prior {
            Some(p) => {
                if p.upper() != self.upper {
                    return Err(Error::InvalidConfig(format!(
                        "prior support ends at {} but R = {}",
                        p.upper(),
                        self.upper
                    )));
                }
                p.clone()
            }
            None => Prior::uniform(self.upper)?,
        };
        let grid_size = || -> Result<usize> {
            match (self.grid_size, horizon) {
                (Some(m), _) => Ok(m),
                (None, Some(t)) => Ok(((t as f64).sqrt().ceil() as usize).max(2)),
                (None, None) => Err(Error::InvalidConfig(
                    "grid_size is required when no horizon is known".into(),
                )),
            }
        };
        let schedule = self.schedule.unwrap_or(Schedule::Sqrt);
        schedule.validate()?;
        let eta_scale = self.eta_scale.unwrap_or(1.0);
        if !(eta_scale.is_finite() && eta_scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eta_scale {eta_scale} must be positive"
            )));
        }
        let kind = match self.algorithm {
            Algorithm::Bayesian => PredictorKind::Bayesian {
                engine: ExactBelief::new(prior),
                schedule,
            },
            Algorithm::Quantized => PredictorKind::Quantized {
                engine: QuantizedBelief::new(prior, grid_size()?)?,
                schedule,
            },
            Algorithm::Discounted => {
                let beta = self.beta.ok_or_else(|| {
                    Error::InvalidConfig("discounted predictor needs beta".into())
                })?;
                let engine = DiscountedBelief::new(prior, grid_size()?, beta)?;
                let schedule = self
                    .schedule
                    .unwrap_or(Schedule::Constant(discount_lambda(beta)));
                PredictorKind::Discounted { engine, schedule }
            }
            Algorithm::Erm => PredictorKind::Erm {
                engine: ExactBelief::new(prior),
            },
            Algorithm::Ogd => PredictorKind::Ogd(OgdState::new(self.upper, eta_scale)),
            Algorithm::MultiOgd => PredictorKind::MultiOgd(RouterTable::new(
                self.router_size.unwrap_or(DEFAULT_ROUTER_SIZE),
                self.upper,
                eta_scale,
            )?),
        };
        Ok(Predictor {
            label: self.label(),
            algorithm: self.algorithm,
            upper: self.upper,
            round: 1,
            pending: Vec::new(),
            kind,
        })
    }
}

/// Per-level online gradient descent iterates on the quantile loss.
///
/// Iterates may leave `[0, R]`. A level is tracked from the first time it is
/// queried, starting at `alpha * R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OgdState {
    upper: f64,
    eta_scale: f64,
    // keyed by alpha.to_bits(); order matches numeric order for alpha >= 0
    iterates: BTreeMap<u64, f64>,
}

impl OgdState {
    pub fn new(upper: f64, eta_scale: f64) -> Self {
        Self {
            upper,
            eta_scale,
            iterates: BTreeMap::new(),
        }
    }

    /// Learning rate `eta_scale * R / sqrt(t)`.
    pub fn learning_rate(&self, t: u64) -> f64 {
        self.eta_scale * self.upper / (t as f64).sqrt()
    }

    pub fn iterate(&self, alpha: f64) -> f64 {
        self.iterates
            .get(&alpha.to_bits())
            .copied()
            .unwrap_or(alpha * self.upper)
    }

    pub fn track(&mut self, alpha: f64) -> f64 {
        let init = alpha * self.upper;
        *self.iterates.entry(alpha.to_bits()).or_insert(init)
    }

    pub fn levels(&self) -> impl Iterator<Item = f64> + '_ {
        self.iterates.keys().map(|&b| f64::from_bits(b))
    }

    /// One subgradient step for every tracked level; at `r == r*` the
    /// subgradient is `1 - alpha`.
    pub fn step(&mut self, t: u64, r_star: f64) {
        let eta = self.learning_rate(t);
        for (&bits, r) in self.iterates.iter_mut() {
            let alpha = f64::from_bits(bits);
            let g = if *r >= r_star { 1.0 - alpha } else { -alpha };
            *r -= eta * g;
        }
    }
}

/// Nearest-neighbor routing of arbitrary levels onto a grid of OGD copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterTable {
    grid: Grid,
    bases: OgdState,
}

impl RouterTable {
    pub fn new(size: usize, upper: f64, eta_scale: f64) -> Result<Self> {
        let grid = Grid::new(size, 1.0)?;
        let mut bases = OgdState::new(upper, eta_scale);
        for j in 0..size {
            bases.track(grid.point(j));
        }
        Ok(Self { grid, bases })
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.grid.size()).map(|j| self.grid.point(j)).collect()
    }

    /// Grid level serving `alpha`; midpoints route to the lower level.
    pub fn route(&self, alpha: f64) -> f64 {
        self.grid.point(self.grid.nearest(alpha))
    }

    pub fn bases(&self) -> &OgdState {
        &self.bases
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PredictorKind {
    Bayesian {
        engine: ExactBelief,
        schedule: Schedule,
    },
    Quantized {
        engine: QuantizedBelief,
        schedule: Schedule,
    },
    Discounted {
        engine: DiscountedBelief,
        schedule: Schedule,
    },
    Erm {
        engine: ExactBelief,
    },
    Ogd(OgdState),
    MultiOgd(RouterTable),
}

/// A conformal predictor following the predict-then-update protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    label: String,
    algorithm: Algorithm,
    upper: f64,
    round: u64,
    pending: Vec<(f64, f64)>,
    kind: PredictorKind,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    predictor: Predictor,
}

impl Predictor {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Current round index `t`, starting at 1.
    pub fn round(&self) -> u64 {
        self.round
    }

    /// Step size `lambda_t` for the Bayesian family in the current round.
    pub fn step_size(&self) -> Option<f64> {
        match &self.kind {
            PredictorKind::Bayesian { schedule, .. }
            | PredictorKind::Quantized { schedule, .. }
            | PredictorKind::Discounted { schedule, .. } => Some(schedule.step_size(self.round)),
            _ => None,
        }
    }

    /// Threshold for `alpha` without registering the query.
    pub fn threshold(&self, alpha: f64) -> Result<f64> {
        let alpha = ConfidenceLevel::new(alpha)?.get();
        let t = self.round;
        Ok(match &self.kind {
            PredictorKind::Bayesian { engine, schedule } => {
                engine.quantile(schedule.step_size(t), alpha)
            }
            PredictorKind::Quantized { engine, schedule } => {
                engine.quantile(schedule.step_size(t), alpha)
            }
            PredictorKind::Discounted { engine, schedule } => {
                engine.quantile(schedule.step_size(t), alpha)
            }
            PredictorKind::Erm { engine } => {
                let n = engine.observed();
                if n == 0 {
                    engine.prior().inverse_cdf(alpha)
                } else {
                    let k = order_index(alpha, n as usize);
                    engine.stream().select(k as u64).expect("k within 1..=n")
                }
            }
            PredictorKind::Ogd(state) => state.iterate(alpha),
            PredictorKind::MultiOgd(router) => router.bases.iterate(router.route(alpha)),
        })
    }

    /// Answers a query for the current round and remembers it for scoring.
    pub fn predict(&mut self, alpha: f64) -> Result<f64> {
        let level = ConfidenceLevel::new(alpha)?.get();
        if let PredictorKind::Ogd(state) = &mut self.kind {
            state.track(level);
        }
        let r = self.threshold(level)?;
        self.pending.push((level, r));
        Ok(r)
    }

    /// Reveals the true score, closes round `t` and advances to `t + 1`.
    pub fn update(&mut self, r_star: f64) -> Result<Vec<PredictorRecord>> {
        if !(0.0..=self.upper).contains(&r_star) {
            return Err(Error::OutOfDomain {
                score: r_star,
                upper: self.upper,
            });
        }
        let t = self.round;
        match &mut self.kind {
            PredictorKind::Bayesian { engine, .. } | PredictorKind::Erm { engine } => {
                engine.observe(r_star)?
            }
            PredictorKind::Quantized { engine, .. } => engine.observe(r_star)?,
            PredictorKind::Discounted { engine, .. } => engine.observe(r_star)?,
            PredictorKind::Ogd(state) => state.step(t, r_star),
            PredictorKind::MultiOgd(router) => router.bases.step(t, r_star),
        }
        let records = self
            .pending
            .drain(..)
            .map(|(alpha, thr)| PredictorRecord::new(t, alpha, thr, r_star))
            .collect();
        self.round += 1;
        Ok(records)
    }

    pub fn exact_engine(&self) -> Option<&ExactBelief> {
        match &self.kind {
            PredictorKind::Bayesian { engine, .. } | PredictorKind::Erm { engine } => Some(engine),
            _ => None,
        }
    }

    pub fn quantized_engine(&self) -> Option<&QuantizedBelief> {
        match &self.kind {
            PredictorKind::Quantized { engine, .. } => Some(engine),
            _ => None,
        }
    }

    pub fn discounted_engine(&self) -> Option<&DiscountedBelief> {
        match &self.kind {
            PredictorKind::Discounted { engine, .. } => Some(engine),
            _ => None,
        }
    }

    pub fn ogd_state(&self) -> Option<&OgdState> {
        match &self.kind {
            PredictorKind::Ogd(s) => Some(s),
            PredictorKind::MultiOgd(r) => Some(&r.bases),
            _ => None,
        }
    }

    /// Versioned JSON dump of the full predictor state.
    pub fn to_snapshot(&self) -> Result<String> {
        serde_json::to_string(&Snapshot {
            version: SNAPSHOT_VERSION,
            predictor: self.clone(),
        })
        .map_err(|e| Error::Snapshot(e.to_string()))
    }

    pub fn from_snapshot(json: &str) -> Result<Self> {
        let snap: Snapshot =
            serde_json::from_str(json).map_err(|e| Error::Snapshot(e.to_string()))?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported snapshot version {}",
                snap.version
            )));
        }
        Ok(snap.predictor)
    }
}
