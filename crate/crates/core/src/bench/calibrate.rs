use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, par_map};
use crate::controller::{Traffic, ABA_CW_MIN};
use crate::error::{Error, Result};
use crate::learner::{Learner, LearnerConfig, ObsKind, Observation};
use crate::mac_sim::{BackoffPolicy, SimConfig, Simulator};
use crate::models::{aba_cw, raw_fit, EstimatorKind, ModelCoefficients};
use crate::workload::Trace;

/// One period of the exhaustive sweep, measured from the state the oracle
/// trajectory reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibRow {
    pub period: usize,
    pub t: u64,
    pub actives: u32,
    /// Active count of the previous period (0 for the first).
    pub actives_prev: u32,
    /// Oracle throughput of the previous period.
    pub tplast: f64,
    /// Aggregate throughput per grid CW, in grid order.
    pub tp_by_cw: Vec<f64>,
    /// Throughput with every station on BEB(15,63).
    pub tp_beb: f64,
    pub cwopt: u32,
    pub tp_opt: f64,
}

fn apply_activity(sim: &mut Simulator, trace: &Trace, t: usize, period_s: usize, traffic: Traffic) -> Result<()> {
    for i in 0..trace.n_stations() {
        let bytes: u64 = trace.volumes[t..t + period_s].iter().map(|r| r[i]).sum();
        sim.set_active(i, bytes > 0)?;
        sim.set_budget(
            i,
            match traffic {
                Traffic::Saturated => None,
                Traffic::Volume => Some(bytes.saturating_mul(8)),
            },
        )?;
    }
    Ok(())
}

fn run_with(base: &Simulator, policy: BackoffPolicy, period_s: usize) -> Result<(Simulator, f64)> {
    let mut sim = base.clone();
    for i in 0..sim.stations().len() {
        sim.set_policy(i, policy)?;
    }
    let slots = sim.config().slots_for_seconds(period_s as f64);
    let m = sim.run_period(slots)?;
    let bits: u64 = m.per_station.iter().map(|s| s.bits).sum();
    Ok((sim, bits as f64 / period_s as f64))
}

/// For every period, run each grid CW (and BEB) from the same simulator
/// state and RNG stream, keep the best, and continue from its end state.
pub fn exhaustive_calibration(
    trace: &Trace,
    cw_grid: &[u32],
    sim: &SimConfig,
    period_s: usize,
    traffic: Traffic,
) -> Result<Vec<CalibRow>> {
    if cw_grid.is_empty() {
        return Err(Error::domain("cw grid is empty"));
    }
    if period_s == 0 || trace.n_stations() == 0 {
        return Err(Error::domain("need period_s >= 1 and a nonempty trace"));
    }
    let policies = cw_grid
        .iter()
        .map(|&cw| BackoffPolicy::fixed(cw))
        .collect::<Result<Vec<_>>>()?;
    let cfg = SimConfig {
        n_stations: trace.n_stations(),
        ..sim.clone()
    };
    let mut base = Simulator::uniform(cfg, policies[0])?;
    for i in 0..trace.n_stations() {
        base.set_active(i, false)?;
    }
    let mut rows = Vec::new();
    let (mut tplast, mut actives_prev) = (0.0, 0);
    for (period, t) in (0..trace.seconds() / period_s).map(|k| (k, k * period_s)) {
        apply_activity(&mut base, trace, t, period_s, traffic)?;
        let actives = base.stations().iter().filter(|s| s.active).count() as u32;
        let runs = par_map(&policies, |&p| run_with(&base, p, period_s))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let (_, tp_beb) = run_with(&base, BackoffPolicy::default_beb(), period_s)?;
        let tp_by_cw: Vec<f64> = runs.iter().map(|r| r.1).collect();
        let mut best = 0;
        for (i, &tp) in tp_by_cw.iter().enumerate() {
            if tp > tp_by_cw[best] {
                best = i;
            }
        }
        let tp_opt = tp_by_cw[best];
        rows.push(CalibRow {
            period,
            t: trace.timestamps[t],
            actives,
            actives_prev,
            tplast,
            tp_by_cw,
            tp_beb,
            cwopt: cw_grid[best],
            tp_opt,
        });
        base = runs.into_iter().nth(best).expect("best index in range").0;
        tplast = tp_opt;
        actives_prev = actives;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2Comparison {
    pub rows: usize,
    pub r2_log: Option<f64>,
    pub r2_raw: Option<f64>,
    pub coeffs_log: ModelCoefficients,
    pub coeffs_raw: ModelCoefficients,
}

/// Fit `cwopt` and `ln(cwopt)` on raw `(actives, tplast)` over rows with
/// at least one active station.
pub fn log_vs_raw_r2(rows: &[CalibRow]) -> Result<R2Comparison> {
    let used: Vec<&CalibRow> = rows.iter().filter(|r| r.actives > 0).collect();
    let a: Vec<f64> = used.iter().map(|r| r.actives as f64).collect();
    let tp: Vec<f64> = used.iter().map(|r| r.tplast).collect();
    let cw: Vec<u32> = used.iter().map(|r| r.cwopt).collect();
    let log = raw_fit(&a, &tp, &cw, true)?;
    let raw = raw_fit(&a, &tp, &cw, false)?;
    Ok(R2Comparison {
        rows: used.len(),
        r2_log: log.r_squared,
        r2_raw: raw.r_squared,
        coeffs_log: log.coeffs,
        coeffs_raw: raw.coeffs,
    })
}

/// Index of the grid value nearest to `cw` in log distance; ties go to the
/// smaller window.
pub fn snap_to_grid(grid: &[u32], cw: u32) -> usize {
    let x = (cw.max(1) as f64).ln();
    let mut best = 0;
    for (i, &g) in grid.iter().enumerate() {
        let d = ((g as f64).ln() - x).abs();
        let b = ((grid[best] as f64).ln() - x).abs();
        if d < b - 1e-12 || ((d - b).abs() <= 1e-12 && g < grid[best]) {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedAlgorithm {
    Optimal,
    Beb,
    Aba,
    Learned(EstimatorKind),
}

impl SpeedAlgorithm {
    pub fn all() -> Vec<SpeedAlgorithm> {
        vec![
            SpeedAlgorithm::Optimal,
            SpeedAlgorithm::Beb,
            SpeedAlgorithm::Aba,
            SpeedAlgorithm::Learned(EstimatorKind::Lr),
            SpeedAlgorithm::Learned(EstimatorKind::Nb),
            SpeedAlgorithm::Learned(EstimatorKind::Dnn),
        ]
    }

    pub fn name(self) -> String {
        match self {
            SpeedAlgorithm::Optimal => "Optimal".into(),
            SpeedAlgorithm::Beb => "BEB".into(),
            SpeedAlgorithm::Aba => "ABA".into(),
            SpeedAlgorithm::Learned(k) => format!("MLBA-{k:?}").to_uppercase(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSpeedConfig {
    pub train_times: Vec<usize>,
    /// First row of the held-out evaluation stretch; warmups are drawn
    /// from the rows before it.
    pub eval_start: usize,
    pub eval_len: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Grid must match the calibration grid.
    pub learner: LearnerConfig,
}

impl Default for TrainSpeedConfig {
    fn default() -> Self {
        TrainSpeedConfig {
            train_times: vec![5, 10, 20, 35, 60, 120, 300],
            eval_start: 1800,
            eval_len: 1800,
            repetitions: 20,
            seed: 1,
            learner: LearnerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpeedRow {
    pub algorithm: String,
    pub train_s: usize,
    /// Achieved over oracle throughput on the evaluation stretch, averaged
    /// over repetitions.
    pub ratio: f64,
}

/// Random-CW warmup of `train_s` periods, then a frozen model predicts
/// through the evaluation stretch.
fn learned_ratio(
    rows: &[CalibRow],
    grid: &[u32],
    cfg: &TrainSpeedConfig,
    kind: EstimatorKind,
    train_s: usize,
    rep: usize,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, (train_s * 1000 + rep) as u64));
    let latest = cfg.eval_start - train_s;
    let start = rng.random_range(1..=latest.max(1));
    let mut learner = Learner::new(LearnerConfig {
        estimator: kind,
        ..cfg.learner.clone()
    })?;
    let mut obs = Vec::with_capacity(train_s);
    let mut tplast = rows[start].tplast;
    for row in &rows[start..start + train_s] {
        let i = rng.random_range(0..grid.len());
        let tp = row.tp_by_cw[i];
        obs.push(Observation::new(tplast, row.actives, grid[i], tp, ObsKind::Calibration)?);
        tplast = tp;
    }
    learner.extend(obs)?;
    let eval = &rows[cfg.eval_start..cfg.eval_start + cfg.eval_len];
    let (mut got, mut best) = (0.0, 0.0);
    let mut tplast = eval[0].tplast;
    for row in eval {
        let tp = match learner.predict(row.actives_prev, tplast) {
            Some(cw) => row.tp_by_cw[snap_to_grid(grid, cw)],
            None => row.tp_by_cw[rng.random_range(0..grid.len())],
        };
        got += tp;
        best += row.tp_opt;
        tplast = tp;
    }
    Ok(if best > 0.0 { got / best } else { 1.0 })
}

fn baseline_ratio(rows: &[CalibRow], pick: impl Fn(&CalibRow) -> Result<f64>) -> Result<f64> {
    let (mut got, mut best) = (0.0, 0.0);
    for row in rows {
        got += pick(row)?;
        best += row.tp_opt;
    }
    Ok(if best > 0.0 { got / best } else { 1.0 })
}

/// Fraction-of-optimal throughput per algorithm and train time.
pub fn training_speed_sim(
    rows: &[CalibRow],
    algorithms: &[SpeedAlgorithm],
    cfg: &TrainSpeedConfig,
) -> Result<Vec<TrainSpeedRow>> {
    let grid = &cfg.learner.cw_grid;
    if rows.first().is_some_and(|r| r.tp_by_cw.len() != grid.len()) {
        return Err(Error::domain("learner grid does not match the calibration grid"));
    }
    if cfg.repetitions == 0 || cfg.eval_len == 0 || cfg.eval_start + cfg.eval_len > rows.len() {
        return Err(Error::domain(format!(
            "evaluation stretch {}+{} does not fit {} rows",
            cfg.eval_start,
            cfg.eval_len,
            rows.len()
        )));
    }
    if let Some(&t) = cfg.train_times.iter().find(|&&t| t == 0 || t + 1 > cfg.eval_start) {
        return Err(Error::domain(format!("train time {t} does not fit before the evaluation stretch")));
    }
    let eval = &rows[cfg.eval_start..cfg.eval_start + cfg.eval_len];
    let mut jobs = Vec::new();
    for &alg in algorithms {
        for &t in &cfg.train_times {
            jobs.push((alg, t));
        }
    }
    let out = par_map(&jobs, |&(alg, train_s)| -> Result<TrainSpeedRow> {
        let ratio = match alg {
            SpeedAlgorithm::Optimal => baseline_ratio(eval, |r| Ok(r.tp_opt))?,
            SpeedAlgorithm::Beb => baseline_ratio(eval, |r| Ok(r.tp_beb))?,
            SpeedAlgorithm::Aba => baseline_ratio(eval, |r| {
                let cw = aba_cw(ABA_CW_MIN, r.actives_prev)?.cw();
                Ok(r.tp_by_cw[snap_to_grid(grid, cw)])
            })?,
            SpeedAlgorithm::Learned(kind) => {
                let sum = (0..cfg.repetitions)
                    .map(|rep| learned_ratio(rows, grid, cfg, kind, train_s, rep))
                    .sum::<Result<f64>>()?;
                sum / cfg.repetitions as f64
            }
        };
        Ok(TrainSpeedRow {
            algorithm: alg.name(),
            train_s,
            ratio,
        })
    });
    out.into_iter().collect()
}
