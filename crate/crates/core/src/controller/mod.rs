//! Period loop over simulated APs: collect stats, decide a CW, enforce it,
//! log the outcome. The HTTP surface lives in [`server`].

pub mod server;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::Receiver;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{DecisionKind, Learner, LearnerConfig, LearnerState, LearnerStatus};
use crate::mac_sim::{BackoffPolicy, PeriodMetrics, SimConfig, Simulator, BEB_DEFAULT, CW_LIMIT};
use crate::models::{aba_cw, EstimatorKind, ModelSnapshot};
use crate::workload::{generate_trace, load_trace, GenParams, Trace};

pub const RUNLOG_SCHEMA_VERSION: u32 = 1;

/// Window ABA scales by the active count.
pub const ABA_CW_MIN: u32 = 15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatedAp {
    pub id: usize,
    /// Station indices in the simulator served by this AP.
    pub stations: Vec<usize>,
    pub cw_min: u32,
    pub cw_max: u32,
    pub controlled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApLoad {
    pub id: usize,
    pub tp_bps: f64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub actives: u32,
    pub aggregate_tp_bps: f64,
    pub per_ap: Vec<ApLoad>,
}

/// One AP per station, sharing a simulator.
#[derive(Debug, Clone)]
pub struct ApBank {
    pub aps: Vec<SimulatedAp>,
    sim: Simulator,
    last: Option<PeriodMetrics>,
    /// Nominal length of the last period in seconds.
    last_secs: f64,
}

impl ApBank {
    /// `controlled` APs (the first ones) accept CW commands; the rest keep
    /// the BEB default.
    pub fn new(sim_config: SimConfig, controlled: usize) -> Result<Self> {
        let n = sim_config.n_stations;
        if controlled > n {
            return Err(Error::domain(format!("{controlled} controlled APs out of {n}")));
        }
        let sim = Simulator::uniform(sim_config, BackoffPolicy::default_beb())?;
        let aps = (0..n)
            .map(|i| SimulatedAp {
                id: i,
                stations: vec![i],
                cw_min: BEB_DEFAULT.0,
                cw_max: BEB_DEFAULT.1,
                controlled: i < controlled,
            })
            .collect();
        Ok(ApBank {
            aps,
            sim,
            last: None,
            last_secs: 0.0,
        })
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn simulator_mut(&mut self) -> &mut Simulator {
        &mut self.sim
    }

    pub fn last_metrics(&self) -> Option<&PeriodMetrics> {
        self.last.as_ref()
    }

    /// Enforce `(cw, cw)` on every controlled AP from the next period on.
    /// Out-of-range values change nothing.
    pub fn set_cw_all(&mut self, cw: u32) -> Result<usize> {
        if !(1..=CW_LIMIT).contains(&cw) {
            return Err(Error::Rejected(format!("cw {cw} outside [1, {CW_LIMIT}]")));
        }
        let policy = BackoffPolicy::fixed(cw)?;
        let mut changed = 0;
        for ap in self.aps.iter_mut().filter(|ap| ap.controlled) {
            ap.cw_min = cw;
            ap.cw_max = cw;
            for &s in &ap.stations {
                self.sim.set_policy(s, policy)?;
            }
            changed += 1;
        }
        Ok(changed)
    }

    /// Put controlled APs back on the BEB default.
    pub fn restore_default(&mut self) -> Result<()> {
        let policy = BackoffPolicy::default_beb();
        for ap in self.aps.iter_mut().filter(|ap| ap.controlled) {
            (ap.cw_min, ap.cw_max) = BEB_DEFAULT;
            for &s in &ap.stations {
                self.sim.set_policy(s, policy)?;
            }
        }
        Ok(())
    }

    /// Simulate one period of `seconds` (rounded to whole slots).
    pub fn run_period(&mut self, seconds: f64) -> Result<&PeriodMetrics> {
        let slots = self.sim.config().slots_for_seconds(seconds);
        let m = self.sim.run_period(slots)?;
        self.last_secs = seconds;
        Ok(self.last.insert(m))
    }

    pub fn collect_stats(&self) -> Result<Stats> {
        collect_stats(&self.aps, self.last.as_ref(), self.last_secs)
    }
}

/// Per-AP delivered bits over the nominal period length; an AP is active
/// when it delivered any bits.
pub fn collect_stats(aps: &[SimulatedAp], metrics: Option<&PeriodMetrics>, period_s: f64) -> Result<Stats> {
    let m = metrics.ok_or_else(|| Error::NotReady("no period has completed".into()))?;
    if period_s.is_nan() || period_s <= 0.0 {
        return Err(Error::domain("period length must be positive"));
    }
    let per_ap: Vec<ApLoad> = aps
        .iter()
        .map(|ap| {
            let bits: u64 = ap.stations.iter().map(|&s| m.per_station[s].bits).sum();
            ApLoad {
                id: ap.id,
                tp_bps: bits as f64 / period_s,
                active: bits > 0,
            }
        })
        .collect();
    Ok(Stats {
        actives: per_ap.iter().filter(|l| l.active).count() as u32,
        aggregate_tp_bps: per_ap.iter().map(|l| l.tp_bps).sum(),
        per_ap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    Beb,
    Fixed { cw: u32 },
    Aba,
    MlbaLr,
    MlbaNb,
    MlbaDnn,
}

impl Policy {
    pub fn estimator(self) -> Option<EstimatorKind> {
        match self {
            Policy::MlbaLr => Some(EstimatorKind::Lr),
            Policy::MlbaNb => Some(EstimatorKind::Nb),
            Policy::MlbaDnn => Some(EstimatorKind::Dnn),
            _ => None,
        }
    }

    pub fn name(self) -> String {
        match self {
            Policy::Beb => "BEB".into(),
            Policy::Fixed { cw } => format!("Fixed({cw})"),
            Policy::Aba => "ABA".into(),
            Policy::MlbaLr => "MLBA-LR".into(),
            Policy::MlbaNb => "MLBA-NB".into(),
            Policy::MlbaDnn => "MLBA-DNN".into(),
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if let Some(w) = lower.strip_prefix("fixed:").or_else(|| lower.strip_prefix("fixed=")) {
            let cw: u32 = w.parse().map_err(|_| Error::domain(format!("bad fixed cw `{w}`")))?;
            if !(1..=CW_LIMIT).contains(&cw) {
                return Err(Error::domain(format!("fixed cw {cw} outside [1, {CW_LIMIT}]")));
            }
            return Ok(Policy::Fixed { cw });
        }
        match lower.as_str() {
            "beb" => Ok(Policy::Beb),
            "aba" => Ok(Policy::Aba),
            "lr" | "mlba-lr" | "mlba_lr" => Ok(Policy::MlbaLr),
            "nb" | "mlba-nb" | "mlba_nb" => Ok(Policy::MlbaNb),
            "dnn" | "mlba-dnn" | "mlba_dnn" => Ok(Policy::MlbaDnn),
            _ => Err(Error::domain(format!(
                "unknown policy `{s}` (beb, fixed:<cw>, aba, lr, nb, dnn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Traffic {
    /// Active stations always have a frame queued.
    #[default]
    Saturated,
    /// Active stations send at most the trace volume of the period.
    Volume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    Path(PathBuf),
    Generate(GenParams),
}

impl Default for TraceSource {
    fn default() -> Self {
        TraceSource::Generate(GenParams::default())
    }
}

impl TraceSource {
    pub fn load(&self) -> Result<Trace> {
        match self {
            TraceSource::Path(p) => load_trace(p),
            TraceSource::Generate(g) => generate_trace(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub period_s: u64,
    pub policy: Policy,
    pub learner: LearnerConfig,
    pub sim: SimConfig,
    pub trace: TraceSource,
    pub output: Option<PathBuf>,
    pub bind: String,
    /// Number of controlled APs; `None` controls all of them.
    pub controlled_aps: Option<usize>,
    pub traffic: Traffic,
    /// Seed for the learner's exploration draws.
    pub learner_seed: u64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            period_s: 1,
            policy: Policy::MlbaLr,
            learner: LearnerConfig::default(),
            sim: SimConfig::default(),
            trace: TraceSource::default(),
            output: None,
            bind: "127.0.0.1:8080".into(),
            controlled_aps: None,
            traffic: Traffic::Saturated,
            learner_seed: 1,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=10).contains(&self.period_s) {
            return Err(Error::domain("period_s must lie in [1, 10]"));
        }
        if let Policy::Fixed { cw } = self.policy {
            if !(1..=CW_LIMIT).contains(&cw) {
                return Err(Error::domain(format!("fixed cw {cw} outside [1, {CW_LIMIT}]")));
            }
        }
        self.learner.validate()?;
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ControllerConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordDecision {
    /// Controlled APs left on BEB.
    Default,
    Static,
    Aba,
    Calibration,
    Explore,
    Predict,
    /// CW supplied through the control surface.
    Manual,
}

impl From<DecisionKind> for RecordDecision {
    fn from(k: DecisionKind) -> Self {
        match k {
            DecisionKind::Calibration => RecordDecision::Calibration,
            DecisionKind::Explore => RecordDecision::Explore,
            DecisionKind::Predict => RecordDecision::Predict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: u64,
    /// Trace timestamp at the start of the period.
    pub t: u64,
    pub actives: u32,
    pub per_ap_tp_bps: Vec<f64>,
    pub aggregate_tp_bps: f64,
    pub median_latency_us: Option<f64>,
    /// `None` while controlled APs run BEB.
    pub cwenf: Option<u32>,
    pub decision: RecordDecision,
    pub retry_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub record: String,
    pub schema_version: u32,
    pub config: ControllerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFooter {
    pub record: String,
    pub periods: u64,
    /// The run ended before the calibration phase did.
    pub calibration_only: bool,
    pub model: Option<ModelSnapshot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: RunHeader,
    pub records: Vec<PeriodRecord>,
    pub footer: RunFooter,
}

#[derive(Serialize)]
struct TaggedRecord<'a> {
    record: &'static str,
    #[serde(flatten)]
    inner: &'a PeriodRecord,
}

impl RunLog {
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<run log>", e);
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n").map_err(io)?;
        for r in &self.records {
            serde_json::to_writer(&mut out, &TaggedRecord { record: "period", inner: r })?;
            out.write_all(b"\n").map_err(io)?;
        }
        serde_json::to_writer(&mut out, &self.footer)?;
        out.write_all(b"\n").map_err(io)?;
        out.flush().map_err(io)
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_ndjson(std::io::BufWriter::new(f))
    }

    pub fn read_ndjson<R: BufRead>(input: R) -> Result<RunLog> {
        let mut lines = input.lines().enumerate();
        let mut next = |what: &str| -> Result<(u64, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i as u64 + 1, l)),
                Some((i, Err(e))) => Err(Error::parse(i as u64 + 1, e.to_string())),
                None => Err(Error::parse(0, format!("missing {what}"))),
            }
        };
        let (_, h) = next("header")?;
        let header: RunHeader = serde_json::from_str(&h).map_err(|e| Error::parse(1, e.to_string()))?;
        if header.schema_version != RUNLOG_SCHEMA_VERSION {
            return Err(Error::parse(1, format!("unsupported schema_version {}", header.schema_version)));
        }
        let mut records = Vec::new();
        loop {
            let (n, line) = next("footer")?;
            let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::parse(n, e.to_string()))?;
            match v.get("record").and_then(|r| r.as_str()) {
                Some("period") => records.push(serde_json::from_value(v).map_err(|e| Error::parse(n, e.to_string()))?),
                Some("final") => {
                    let footer = serde_json::from_value(v).map_err(|e| Error::parse(n, e.to_string()))?;
                    return Ok(RunLog { header, records, footer });
                }
                _ => return Err(Error::parse(n, "unknown record type")),
            }
        }
    }

    pub fn aggregate_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.aggregate_tp_bps).collect()
    }
}

/// Step-wise replay of a trace under one policy.
pub struct ReplayDriver {
    config: ControllerConfig,
    trace: Trace,
    bank: ApBank,
    learner: Option<Learner>,
    rng: ChaCha8Rng,
    period: u64,
    last_stats: Option<Stats>,
    records: Vec<PeriodRecord>,
    commands: Option<Receiver<u32>>,
}

impl ReplayDriver {
    pub fn new(mut config: ControllerConfig, trace: Trace) -> Result<Self> {
        config.validate()?;
        if trace.n_stations() == 0 {
            return Err(Error::domain("trace has no stations"));
        }
        config.sim.n_stations = trace.n_stations();
        config.learner.period_s = config.period_s;
        let controlled = config.controlled_aps.unwrap_or(trace.n_stations());
        let mut bank = ApBank::new(config.sim.clone(), controlled)?;
        for i in 0..trace.n_stations() {
            bank.simulator_mut().set_active(i, false)?;
        }
        let learner = match config.policy.estimator() {
            Some(est) => Some(Learner::new(LearnerConfig {
                estimator: est,
                ..config.learner.clone()
            })?),
            None => None,
        };
        if let Policy::Fixed { cw } = config.policy {
            bank.set_cw_all(cw)?;
        }
        Ok(ReplayDriver {
            rng: ChaCha8Rng::seed_from_u64(config.learner_seed),
            config,
            trace,
            bank,
            learner,
            period: 0,
            last_stats: None,
            records: Vec::new(),
            commands: None,
        })
    }

    /// Continue from a learner trained elsewhere (same estimator).
    pub fn with_learner_state(mut self, state: LearnerState) -> Result<Self> {
        let Some(est) = self.config.policy.estimator() else {
            return Err(Error::domain(format!("policy {} has no learner", self.config.policy.name())));
        };
        if state.config.estimator != est {
            return Err(Error::domain("learner state was trained with a different estimator"));
        }
        self.learner = Some(Learner::from_state(state)?);
        Ok(self)
    }

    /// Accept CW commands; each applies to the next period only.
    pub fn attach_commands(&mut self, rx: Receiver<u32>) {
        self.commands = Some(rx);
    }

    pub fn total_periods(&self) -> u64 {
        self.trace.seconds() as u64 / self.config.period_s
    }

    pub fn is_done(&self) -> bool {
        self.period >= self.total_periods()
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn bank(&self) -> &ApBank {
        &self.bank
    }

    pub fn learner(&self) -> Option<&Learner> {
        self.learner.as_ref()
    }

    pub fn learner_status(&self) -> Option<LearnerStatus> {
        self.learner.as_ref().map(Learner::status)
    }

    pub fn last_stats(&self) -> Option<&Stats> {
        self.last_stats.as_ref()
    }

    pub fn records(&self) -> &[PeriodRecord] {
        &self.records
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    fn apply_trace_activity(&mut self, start: usize) -> Result<()> {
        let len = self.config.period_s as usize;
        for i in 0..self.trace.n_stations() {
            let bytes: u64 = self.trace.volumes[start..start + len].iter().map(|r| r[i]).sum();
            self.bank.simulator_mut().set_active(i, bytes > 0)?;
            let budget = match self.config.traffic {
                Traffic::Saturated => None,
                Traffic::Volume => Some(bytes.saturating_mul(8)),
            };
            self.bank.simulator_mut().set_budget(i, budget)?;
        }
        Ok(())
    }

    fn manual_command(&mut self) -> Option<u32> {
        let rx = self.commands.as_ref()?;
        let mut last = None;
        while let Ok(cw) = rx.try_recv() {
            last = Some(cw);
        }
        last
    }

    /// Decide and enforce the CW for the coming period from the previous
    /// period's stats.
    fn decide(&mut self) -> Result<(Option<u32>, RecordDecision, bool)> {
        let (actives, tp) = self
            .last_stats
            .as_ref()
            .map_or((0, 0.0), |s| (s.actives, s.aggregate_tp_bps));
        if let Some(cw) = self.manual_command() {
            self.bank.set_cw_all(cw)?;
            return Ok((Some(cw), RecordDecision::Manual, false));
        }
        match self.config.policy {
            Policy::Beb => {
                self.bank.restore_default()?;
                Ok((None, RecordDecision::Default, false))
            }
            Policy::Fixed { cw } => {
                self.bank.set_cw_all(cw)?;
                Ok((Some(cw), RecordDecision::Static, false))
            }
            Policy::Aba => {
                let cw = aba_cw(ABA_CW_MIN, actives)?.cw();
                self.bank.set_cw_all(cw)?;
                Ok((Some(cw), RecordDecision::Aba, false))
            }
            Policy::MlbaLr | Policy::MlbaNb | Policy::MlbaDnn => {
                let learner = self.learner.as_mut().expect("learner exists for MLBA policies");
                let d = learner.next_cw(actives, tp, &mut self.rng);
                self.bank.set_cw_all(d.cw)?;
                Ok((Some(d.cw), d.kind.into(), true))
            }
        }
    }

    /// Run one period. Returns `None` once the trace is exhausted.
    pub fn step(&mut self) -> Result<Option<&PeriodRecord>> {
        if self.is_done() {
            return Ok(None);
        }
        let start = (self.period * self.config.period_s) as usize;
        self.apply_trace_activity(start)?;
        let (cwenf, decision, learning) = self.decide()?;
        let metrics = self.bank.run_period(self.config.period_s as f64)?.clone();
        let stats = self.bank.collect_stats()?;
        if learning {
            if let Some(l) = self.learner.as_mut() {
                l.observe_outcome(stats.actives, stats.aggregate_tp_bps)?;
            }
        }
        let record = PeriodRecord {
            period: self.period,
            t: self.trace.timestamps[start],
            actives: stats.actives,
            per_ap_tp_bps: stats.per_ap.iter().map(|l| l.tp_bps).collect(),
            aggregate_tp_bps: stats.aggregate_tp_bps,
            median_latency_us: metrics.median_latency_us,
            cwenf,
            decision,
            retry_fraction: metrics.retry_fraction,
        };
        self.last_stats = Some(stats);
        self.records.push(record);
        self.period += 1;
        Ok(self.records.last())
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while self.step()?.is_some() {}
        Ok(())
    }

    pub fn finish(self) -> RunLog {
        let calibration_only = self.learner.as_ref().is_some_and(|l| {
            l.periods_seen() < l.config().calibration_periods()
        });
        RunLog {
            header: RunHeader {
                record: "header".into(),
                schema_version: RUNLOG_SCHEMA_VERSION,
                config: self.config,
            },
            footer: RunFooter {
                record: "final".into(),
                periods: self.records.len() as u64,
                calibration_only,
                model: self.learner.as_ref().map(Learner::model_snapshot),
            },
            records: self.records,
        }
    }
}

/// Replay `trace` under `config` and return the full log.
pub fn run_replay(config: &ControllerConfig, trace: &Trace) -> Result<RunLog> {
    let mut d = ReplayDriver::new(config.clone(), trace.clone())?;
    d.run_to_end()?;
    let log = d.finish();
    if let Some(path) = &config.output {
        log.save(path)?;
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_trace(n: usize, secs: usize) -> Trace {
        Trace::from_volumes(vec![vec![1000; n]; secs]).unwrap()
    }

    #[test]
    fn stats_before_any_period() {
        let bank = ApBank::new(SimConfig::default(), 8).unwrap();
        assert!(matches!(bank.collect_stats(), Err(Error::NotReady(_))));
    }

    #[test]
    fn idle_aps_and_unit_conversion() {
        let cfg = SimConfig {
            n_stations: 3,
            ..SimConfig::default()
        };
        let mut bank = ApBank::new(cfg.clone(), 3).unwrap();
        for i in 0..3 {
            bank.simulator_mut().set_active(i, false).unwrap();
        }
        bank.run_period(0.01).unwrap();
        let s = bank.collect_stats().unwrap();
        assert_eq!((s.actives, s.aggregate_tp_bps), (0, 0.0));
        assert!(s.per_ap.iter().all(|l| l.tp_bps == 0.0 && !l.active));

        // A lone AP sending exactly 10^6 bits in one second.
        let mut bank = ApBank::new(cfg, 3).unwrap();
        for i in 1..3 {
            bank.simulator_mut().set_active(i, false).unwrap();
        }
        bank.simulator_mut().set_budget(0, Some(1_000_000)).unwrap();
        bank.run_period(1.0).unwrap();
        let s = bank.collect_stats().unwrap();
        assert_eq!(s.actives, 1);
        assert_eq!(s.aggregate_tp_bps, 1e6);
    }

    #[test]
    fn set_cw_all_is_atomic() {
        let mut bank = ApBank::new(SimConfig::default(), 8).unwrap();
        assert_eq!(bank.set_cw_all(31).unwrap(), 8);
        assert!(bank.aps.iter().all(|ap| (ap.cw_min, ap.cw_max) == (31, 31)));
        let before = bank.aps.clone();
        assert!(matches!(bank.set_cw_all(2000), Err(Error::Rejected(_))));
        assert!(matches!(bank.set_cw_all(0), Err(Error::Rejected(_))));
        assert_eq!(bank.aps, before);

        let mut half = ApBank::new(SimConfig::default(), 4).unwrap();
        assert_eq!(half.set_cw_all(31).unwrap(), 4);
        let changed = half.aps.iter().filter(|ap| ap.cw_min == 31).count();
        assert_eq!(changed, 4);
        assert!(half.aps[4..].iter().all(|ap| (ap.cw_min, ap.cw_max) == BEB_DEFAULT));
    }

    #[test]
    fn fixed_policy_records() {
        let cfg = ControllerConfig {
            policy: Policy::Fixed { cw: 15 },
            ..ControllerConfig::default()
        };
        let log = run_replay(&cfg, &toy_trace(4, 10)).unwrap();
        assert_eq!(log.records.len(), 10);
        assert!(log.records.iter().all(|r| r.cwenf == Some(15)));
    }

    #[test]
    fn aba_with_eight_actives() {
        let cfg = ControllerConfig {
            policy: Policy::Aba,
            ..ControllerConfig::default()
        };
        let log = run_replay(&cfg, &toy_trace(8, 10)).unwrap();
        // Period 0 has no prior observation.
        assert_eq!(log.records[0].cwenf, Some(1));
        assert!(log.records[1..].iter().all(|r| r.cwenf == Some(59) && r.actives == 8));
    }

    #[test]
    fn runlog_round_trip_and_determinism() {
        let cfg = ControllerConfig {
            policy: Policy::MlbaLr,
            ..ControllerConfig::default()
        };
        let tr = toy_trace(3, 12);
        let a = run_replay(&cfg, &tr).unwrap().to_ndjson();
        let b = run_replay(&cfg, &tr).unwrap().to_ndjson();
        assert_eq!(a, b);
        let back = RunLog::read_ndjson(a.as_bytes()).unwrap();
        assert_eq!(back.records.len(), 12);
        assert!(back.footer.calibration_only);
        assert_eq!(back.to_ndjson(), a);
        let first: serde_json::Value = serde_json::from_str(a.lines().next().unwrap()).unwrap();
        assert_eq!(first["schema_version"], RUNLOG_SCHEMA_VERSION);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("fixed:31".parse::<Policy>().unwrap(), Policy::Fixed { cw: 31 });
        assert_eq!("MLBA-DNN".parse::<Policy>().unwrap(), Policy::MlbaDnn);
        assert!("fixed:0".parse::<Policy>().is_err());
        assert!("rl".parse::<Policy>().is_err());
    }

    #[test]
    fn period_bounds() {
        for p in [0, 11] {
            let cfg = ControllerConfig {
                period_s: p,
                ..ControllerConfig::default()
            };
            assert!(cfg.validate().is_err());
        }
    }
}
