//! Online CW learner: observation queue, best-CW table, periodic refit
//! and per-period decisions.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mac_sim::CW_LIMIT;
use crate::models::dnn::DnnTrainConfig;
use crate::models::nb::{nb_fit_with_domain, LAPLACE_ALPHA};
use crate::models::{EstimatorKind, FittedModel, ModelSnapshot, QuantScheme, TrainingSample};

pub const DEFAULT_GRID: [u32; 10] = [1, 3, 7, 15, 31, 63, 127, 255, 511, 1023];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsKind {
    Calibration,
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Aggregate throughput of the period before the decision, bits/s.
    pub tplast: f64,
    /// Active count of the period the CW was enforced in.
    pub actives: u32,
    /// CW enforced during the period.
    pub cwenf: u32,
    /// Aggregate throughput achieved with `cwenf`, bits/s.
    pub tp: f64,
    pub kind: ObsKind,
}

impl Observation {
    pub fn new(tplast: f64, actives: u32, cwenf: u32, tp: f64, kind: ObsKind) -> Result<Self> {
        if !(1..=CW_LIMIT).contains(&cwenf) {
            return Err(Error::domain(format!("cwenf {cwenf} outside [1, {CW_LIMIT}]")));
        }
        if !(tplast >= 0.0 && tp >= 0.0 && tplast.is_finite() && tp.is_finite()) {
            return Err(Error::domain("throughputs must be finite and >= 0"));
        }
        Ok(Observation {
            tplast,
            actives,
            cwenf,
            tp,
            kind,
        })
    }
}

/// Two bounded FIFOs, one per observation kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwObsQueue {
    pub capacity: usize,
    pub calib: VecDeque<Observation>,
    pub pred: VecDeque<Observation>,
}

impl CwObsQueue {
    pub fn new(capacity: usize) -> Self {
        CwObsQueue {
            capacity: capacity.max(1),
            calib: VecDeque::new(),
            pred: VecDeque::new(),
        }
    }

    pub fn record(&mut self, obs: Observation) {
        let fifo = match obs.kind {
            ObsKind::Calibration => &mut self.calib,
            ObsKind::Predicted => &mut self.pred,
        };
        fifo.push_back(obs);
        while fifo.len() > self.capacity {
            fifo.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.calib.len() + self.pred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Observation> {
        self.calib.iter().chain(self.pred.iter())
    }

    pub fn distinct_cws(&self) -> usize {
        let mut cws: Vec<u32> = self.iter().map(|o| o.cwenf).collect();
        cws.sort_unstable();
        cws.dedup();
        cws.len()
    }
}

/// Append `obs` to the sub-queue of its kind, evicting the oldest entry
/// when full.
pub fn record_observation(queue: &mut CwObsQueue, obs: Observation) {
    queue.record(obs);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwMaxEntry {
    pub alevel: u32,
    pub tlevel: u32,
    pub mtp: f64,
    pub cwopt: u32,
}

/// Refresh the tlevel percentiles from the queue's `tplast` values, then
/// fold every observation into its (alevel, tlevel) key keeping the best
/// throughput (ties: smaller CW). Entries come out sorted by key.
pub fn rebuild_cwmax(queue: &CwObsQueue, scheme: &mut QuantScheme) -> Vec<CwMaxEntry> {
    if queue.is_empty() {
        return Vec::new();
    }
    let tps: Vec<f64> = queue.iter().map(|o| o.tplast).collect();
    scheme.refresh_percentiles(&tps);
    let mut table: BTreeMap<(u32, u32), CwMaxEntry> = BTreeMap::new();
    for o in queue.iter() {
        let (alevel, tlevel) = scheme.quantize(o.actives, o.tplast);
        let cand = CwMaxEntry {
            alevel,
            tlevel,
            mtp: o.tp,
            cwopt: o.cwenf,
        };
        table
            .entry((alevel, tlevel))
            .and_modify(|e| {
                if o.tp > e.mtp || (o.tp == e.mtp && o.cwenf < e.cwopt) {
                    *e = cand;
                }
            })
            .or_insert(cand);
    }
    table.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub history_s: u64,
    pub explore_prob: f64,
    pub calibration_period_s: u64,
    pub period_s: u64,
    pub cw_grid: Vec<u32>,
    pub estimator: EstimatorKind,
    pub quant: QuantScheme,
    pub dnn: DnnTrainConfig,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            history_s: 600,
            explore_prob: 0.01,
            calibration_period_s: 30,
            period_s: 1,
            cw_grid: DEFAULT_GRID.to_vec(),
            estimator: EstimatorKind::Lr,
            quant: QuantScheme::default(),
            dnn: DnnTrainConfig::default(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.explore_prob) {
            return Err(Error::domain("explore_prob must lie in [0, 1]"));
        }
        if self.cw_grid.is_empty()
            || self.cw_grid.windows(2).any(|w| w[0] >= w[1])
            || self.cw_grid[0] < 1
            || *self.cw_grid.last().unwrap() > CW_LIMIT
        {
            return Err(Error::domain("cw_grid must be strictly increasing within [1, 1023]"));
        }
        if self.period_s == 0 || self.history_s == 0 {
            return Err(Error::domain("period_s and history_s must be >= 1"));
        }
        self.quant.validate()
    }

    /// Per-sub-queue capacity in periods.
    pub fn capacity(&self) -> usize {
        (self.history_s / self.period_s).max(1) as usize
    }

    pub fn calibration_periods(&self) -> u64 {
        self.calibration_period_s.div_ceil(self.period_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Calibration,
    Explore,
    Predict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub cw: u32,
    pub kind: DecisionKind,
    /// A prediction was due but no usable model existed.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Pending {
    tplast: f64,
    decision: Decision,
}

/// Read-only view handed to status readers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerStatus {
    pub estimator: EstimatorKind,
    pub calib_queue_len: usize,
    pub pred_queue_len: usize,
    pub table: Vec<CwMaxEntry>,
    pub last_decision: Option<Decision>,
    pub degenerate_fit: bool,
    pub model: ModelSnapshot,
}

/// Serialized learner for run logs and warm restarts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub config: LearnerConfig,
    pub queue: CwObsQueue,
    pub scheme: QuantScheme,
    pub table: Vec<CwMaxEntry>,
    pub periods_seen: u64,
    pub rr_index: usize,
    pub model: ModelSnapshot,
}

#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    queue: CwObsQueue,
    scheme: QuantScheme,
    table: Vec<CwMaxEntry>,
    fitted_on: Option<(Vec<CwMaxEntry>, QuantScheme)>,
    model: Option<Arc<FittedModel>>,
    periods_seen: u64,
    rr_index: usize,
    pending: Option<Pending>,
    last_decision: Option<Decision>,
}

impl Learner {
    pub fn new(config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Learner {
            queue: CwObsQueue::new(config.capacity()),
            scheme: config.quant.clone(),
            table: Vec::new(),
            fitted_on: None,
            model: None,
            periods_seen: 0,
            rr_index: 0,
            pending: None,
            last_decision: None,
            config,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn queue(&self) -> &CwObsQueue {
        &self.queue
    }

    pub fn table(&self) -> &[CwMaxEntry] {
        &self.table
    }

    pub fn scheme(&self) -> &QuantScheme {
        &self.scheme
    }

    /// Current model; the `Arc` is swapped whole on refit.
    pub fn model(&self) -> Option<Arc<FittedModel>> {
        self.model.clone()
    }

    pub fn periods_seen(&self) -> u64 {
        self.periods_seen
    }

    fn in_calibration(&self) -> bool {
        self.periods_seen < self.config.calibration_periods() || self.queue.distinct_cws() < 2
    }

    fn round_robin(&mut self) -> u32 {
        let cw = self.config.cw_grid[self.rr_index % self.config.cw_grid.len()];
        self.rr_index = (self.rr_index + 1) % self.config.cw_grid.len();
        cw
    }

    /// Predicted CW for raw (actives, tp) under the current model.
    pub fn predict(&self, actives: u32, tp: f64) -> Option<u32> {
        let (a, t) = self.scheme.quantize(actives, tp);
        self.model.as_ref().map(|m| m.predict(a, t))
    }

    /// Choose the CW for the next period from the last period's observed
    /// active count and aggregate throughput.
    pub fn next_cw<R: Rng + ?Sized>(&mut self, observed_actives: u32, observed_tp: f64, rng: &mut R) -> Decision {
        let decision = if self.in_calibration() {
            Decision {
                cw: self.round_robin(),
                kind: DecisionKind::Calibration,
                fallback: false,
            }
        } else if rng.random::<f64>() < self.config.explore_prob {
            let i = rng.random_range(0..self.config.cw_grid.len());
            Decision {
                cw: self.config.cw_grid[i],
                kind: DecisionKind::Explore,
                fallback: false,
            }
        } else {
            match self.predict(observed_actives, observed_tp) {
                Some(cw) => Decision {
                    cw,
                    kind: DecisionKind::Predict,
                    fallback: false,
                },
                None => Decision {
                    cw: self.round_robin(),
                    kind: DecisionKind::Calibration,
                    fallback: true,
                },
            }
        };
        self.pending = Some(Pending {
            tplast: observed_tp.max(0.0),
            decision,
        });
        self.last_decision = Some(decision);
        decision
    }

    /// Feed back the active count and throughput of the period run under
    /// the last decision: record the observation, rebuild the table and
    /// refit.
    pub fn observe_outcome(&mut self, actives: u32, tp: f64) -> Result<()> {
        let p = self
            .pending
            .take()
            .ok_or_else(|| Error::NotReady("observe_outcome called without a pending decision".into()))?;
        let kind = match p.decision.kind {
            DecisionKind::Predict => ObsKind::Predicted,
            DecisionKind::Calibration | DecisionKind::Explore => ObsKind::Calibration,
        };
        self.queue
            .record(Observation::new(p.tplast, actives, p.decision.cw, tp.max(0.0), kind)?);
        self.periods_seen += 1;
        self.refit()
    }

    /// Record an observation that did not come from `next_cw`.
    pub fn record(&mut self, obs: Observation) -> Result<()> {
        self.queue.record(obs);
        self.refit()
    }

    /// Record a batch of observations and refit once.
    pub fn extend(&mut self, obs: impl IntoIterator<Item = Observation>) -> Result<()> {
        for o in obs {
            self.queue.record(o);
        }
        self.refit()
    }

    /// Rebuild the table and refit the estimator. An unchanged table
    /// keeps the current model.
    pub fn refit(&mut self) -> Result<()> {
        self.table = rebuild_cwmax(&self.queue, &mut self.scheme);
        if self.table.is_empty() {
            self.model = None;
            self.fitted_on = None;
            return Ok(());
        }
        if let Some((t, s)) = &self.fitted_on {
            if *t == self.table && *s == self.scheme {
                return Ok(());
            }
        }
        let samples = self
            .table
            .iter()
            .map(|e| TrainingSample::new(e.alevel, e.tlevel, e.cwopt))
            .collect::<Result<Vec<_>>>()?;
        let model = match self.config.estimator {
            EstimatorKind::Nb => FittedModel::Nb(nb_fit_with_domain(
                &samples,
                self.scheme.alevels(),
                self.scheme.tlevel_count as u32,
                LAPLACE_ALPHA,
            )?),
            kind => FittedModel::fit(kind, &samples, &self.config.dnn)?,
        };
        self.model = Some(Arc::new(model));
        self.fitted_on = Some((self.table.clone(), self.scheme.clone()));
        Ok(())
    }

    pub fn status(&self) -> LearnerStatus {
        LearnerStatus {
            estimator: self.config.estimator,
            calib_queue_len: self.queue.calib.len(),
            pred_queue_len: self.queue.pred.len(),
            table: self.table.clone(),
            last_decision: self.last_decision,
            degenerate_fit: self.model.as_ref().is_some_and(|m| m.degenerate()),
            model: self.model_snapshot(),
        }
    }

    pub fn model_snapshot(&self) -> ModelSnapshot {
        ModelSnapshot::new(Some(&self.scheme), self.model.as_deref())
    }

    pub fn state(&self) -> LearnerState {
        LearnerState {
            config: self.config.clone(),
            queue: self.queue.clone(),
            scheme: self.scheme.clone(),
            table: self.table.clone(),
            periods_seen: self.periods_seen,
            rr_index: self.rr_index,
            model: self.model_snapshot(),
        }
    }

    pub fn from_state(state: LearnerState) -> Result<Self> {
        let mut l = Learner::new(state.config)?;
        l.queue = state.queue;
        l.queue.capacity = l.config.capacity();
        l.scheme = state.scheme;
        l.table = state.table;
        l.periods_seen = state.periods_seen;
        l.rr_index = state.rr_index % l.config.cw_grid.len();
        l.model = state.model.fitted()?.map(Arc::new);
        if l.model.is_some() {
            l.fitted_on = Some((l.table.clone(), l.scheme.clone()));
        }
        Ok(l)
    }
}
