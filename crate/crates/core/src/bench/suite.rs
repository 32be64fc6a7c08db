use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    exhaustive_calibration, log_vs_raw_r2, longitudinal_benchmark, opportunity_sweep, save_csv, save_ndjson,
    training_speed_sim, CalibRow, ComparisonResult, R2Comparison, SpeedAlgorithm, SweepRow, SweepSpec,
    TrainSpeedConfig, TrainSpeedRow, Window,
};
use crate::controller::{ControllerConfig, Policy, Traffic};
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::mac_sim::SimConfig;
use crate::workload::{generate_trace, GenParams, Trace};

/// Everything `bench` runs: the opportunity sweep, then calibration,
/// training speed and the windowed comparison on one generated trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub seed: u64,
    pub run_sweep: bool,
    pub sweep: SweepSpec,
    /// `duration_s` is replaced by `tuning_s + windows * window_s`.
    pub trace: GenParams,
    /// Leading stretch used for calibration, training speed and learner
    /// warm-up; the test windows follow it.
    pub tuning_s: usize,
    pub window_s: usize,
    pub windows: usize,
    pub sim: SimConfig,
    pub traffic: Traffic,
    pub learner: LearnerConfig,
    pub trainspeed: TrainSpeedConfig,
    pub algorithms: Vec<Policy>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 1,
            run_sweep: true,
            sweep: SweepSpec::default(),
            trace: GenParams {
                seed: 11,
                ..GenParams::default()
            },
            tuning_s: 3600,
            window_s: 900,
            windows: 5,
            sim: SimConfig::aggregated_basic(),
            traffic: Traffic::Saturated,
            learner: LearnerConfig::default(),
            trainspeed: TrainSpeedConfig::default(),
            algorithms: vec![Policy::Beb, Policy::Aba, Policy::MlbaLr, Policy::MlbaNb, Policy::MlbaDnn],
        }
    }
}

impl BenchConfig {
    pub fn test_windows(&self) -> Vec<Window> {
        (0..self.windows)
            .map(|w| Window {
                start_s: self.tuning_s + w * self.window_s,
                len_s: self.window_s,
            })
            .collect()
    }

    pub fn generate_trace(&self) -> Result<Trace> {
        generate_trace(&GenParams {
            duration_s: self.tuning_s + self.windows * self.window_s,
            ..self.trace.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub sweep: Vec<SweepRow>,
    pub calibration: Vec<CalibRow>,
    pub r2: R2Comparison,
    pub trainspeed: Vec<TrainSpeedRow>,
    pub comparison: ComparisonResult,
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.tuning_s == 0 || cfg.window_s == 0 || cfg.windows == 0 {
        return Err(Error::domain("tuning_s, window_s and windows must be positive"));
    }
    let sweep = if cfg.run_sweep {
        opportunity_sweep(&SweepSpec {
            seed: cfg.seed,
            ..cfg.sweep.clone()
        })?
    } else {
        Vec::new()
    };
    let trace = cfg.generate_trace()?;
    let tuning = trace.window(0, cfg.tuning_s)?;
    let calibration = exhaustive_calibration(&tuning, &cfg.learner.cw_grid, &cfg.sim, 1, cfg.traffic)?;
    let r2 = log_vs_raw_r2(&calibration)?;
    let trainspeed = training_speed_sim(
        &calibration,
        &SpeedAlgorithm::all(),
        &TrainSpeedConfig {
            seed: cfg.seed,
            learner: cfg.learner.clone(),
            ..cfg.trainspeed.clone()
        },
    )?;
    let base = ControllerConfig {
        sim: cfg.sim.clone(),
        traffic: cfg.traffic,
        learner: cfg.learner.clone(),
        ..ControllerConfig::default()
    };
    let comparison = longitudinal_benchmark(
        &trace,
        &cfg.test_windows(),
        Some(Window {
            start_s: 0,
            len_s: cfg.tuning_s,
        }),
        &cfg.algorithms,
        &base,
        cfg.seed,
    )?;
    Ok(BenchReport {
        sweep,
        calibration,
        r2,
        trainspeed,
        comparison,
    })
}

fn save_matrix<T: ToString + Copy>(names: &[String], m: &[Vec<T>], path: &Path) -> Result<()> {
    let err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let mut header = vec!["algorithm".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(err)?;
    for (name, row) in names.iter().zip(m) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct SeriesLine<'a> {
    algorithm: &'a str,
    window: usize,
    start_s: usize,
    tp_bps: &'a [f64],
}

impl BenchReport {
    /// Write every table into `dir` (created if missing).
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if !self.sweep.is_empty() {
            save_csv(&self.sweep, &dir.join("sweep.csv"))?;
        }
        save_ndjson(&self.calibration, &dir.join("calibration.ndjson"))?;
        let r2 = serde_json::to_string_pretty(&self.r2)?;
        std::fs::write(dir.join("r2.json"), r2 + "\n").map_err(|e| Error::io(dir.join("r2.json"), e))?;
        save_csv(&self.trainspeed, &dir.join("trainspeed.csv"))?;
        let c = &self.comparison;
        save_matrix(&c.algorithms, &c.avg, &dir.join("avg.csv"))?;
        save_matrix(&c.algorithms, &c.sigl, &dir.join("sigl.csv"))?;
        let mut lines = Vec::new();
        for (ai, name) in c.algorithms.iter().enumerate() {
            for (wi, w) in c.windows.iter().enumerate() {
                lines.push(SeriesLine {
                    algorithm: name,
                    window: wi,
                    start_s: w.start_s,
                    tp_bps: &c.series[ai][wi],
                });
            }
        }
        save_ndjson(&lines, &dir.join("series.ndjson"))
    }
}
