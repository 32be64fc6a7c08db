use serde::{Deserialize, Serialize};

use super::{derive_seed, jain_index, median, par_map};
use crate::error::{Error, Result};
use crate::learner::DEFAULT_GRID;
use crate::mac_sim::{BackoffPolicy, SimConfig, Simulator, BEB_DEFAULT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub n_min: usize,
    pub n_max: usize,
    pub cw_grid: Vec<u32>,
    pub repetitions: usize,
    pub burst_s: f64,
    pub rtscts: bool,
    /// Share of stations that follow the cell's policy; the rest stay on
    /// BEB(15,63). Rounded up.
    pub controlled_fraction: f64,
    pub include_baselines: bool,
    pub seed: u64,
    /// Timing and frame parameters; `n_stations`, `rtscts_enabled` and
    /// `seed` are overridden per cell.
    pub sim: SimConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            n_min: 2,
            n_max: 8,
            cw_grid: DEFAULT_GRID.to_vec(),
            repetitions: 3,
            burst_s: 10.0,
            rtscts: true,
            controlled_fraction: 1.0,
            include_baselines: true,
            seed: 1,
            sim: SimConfig::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cw_grid.is_empty() {
            return Err(Error::domain("cw grid is empty"));
        }
        if self.repetitions == 0 {
            return Err(Error::domain("repetitions must be >= 1"));
        }
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::domain("need 1 <= n_min <= n_max"));
        }
        if !(self.burst_s > 0.0 && self.burst_s.is_finite()) {
            return Err(Error::domain("burst_s must be positive"));
        }
        if !(0.0..=1.0).contains(&self.controlled_fraction) {
            return Err(Error::domain("controlled_fraction must be in [0, 1]"));
        }
        for &cw in &self.cw_grid {
            BackoffPolicy::fixed(cw)?;
        }
        Ok(())
    }

    pub fn controlled(&self, n: usize) -> usize {
        ((self.controlled_fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
    }

    pub fn cells(&self) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for n in self.n_min..=self.n_max {
            for &cw in &self.cw_grid {
                cells.push(SweepCell { n, cw_min: cw, cw_max: cw });
            }
            if self.include_baselines {
                cells.push(SweepCell { n, cw_min: BEB_DEFAULT.0, cw_max: BEB_DEFAULT.1 });
                cells.push(SweepCell { n, cw_min: 1, cw_max: 1023 });
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n: usize,
    pub cw_min: u32,
    pub cw_max: u32,
}

impl SweepCell {
    pub fn is_fixed(&self) -> bool {
        self.cw_min == self.cw_max
    }

    pub fn label(&self) -> String {
        if self.is_fixed() {
            format!("fixed({})", self.cw_min)
        } else {
            format!("beb({},{})", self.cw_min, self.cw_max)
        }
    }

    fn policy(&self) -> Result<BackoffPolicy> {
        if self.is_fixed() {
            BackoffPolicy::fixed(self.cw_min)
        } else {
            BackoffPolicy::beb(self.cw_min, self.cw_max)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub policy: String,
    pub cw_min: u32,
    pub cw_max: u32,
    pub controlled: usize,
    pub median_tp_bps: f64,
    pub median_latency_us: Option<f64>,
    pub retry_fraction: f64,
    pub jain: Option<f64>,
}

struct Rep {
    tp: f64,
    latency: Option<f64>,
    retry: f64,
    jain: Option<f64>,
}

fn run_rep(spec: &SweepSpec, cell: &SweepCell, seed: u64) -> Result<Rep> {
    let cfg = SimConfig {
        n_stations: cell.n,
        rtscts_enabled: spec.rtscts,
        seed,
        ..spec.sim.clone()
    };
    let controlled = spec.controlled(cell.n);
    let policy = cell.policy()?;
    let policies = (0..cell.n)
        .map(|i| if i < controlled { policy } else { BackoffPolicy::default_beb() })
        .collect();
    let mut sim = Simulator::new(cfg.clone(), policies)?;
    let m = sim.run_period(cfg.slots_for_seconds(spec.burst_s))?;
    let secs = spec.burst_s;
    let per_station: Vec<f64> = m.per_station.iter().map(|s| s.bits as f64 / secs).collect();
    Ok(Rep {
        tp: per_station.iter().sum(),
        latency: m.median_latency_us,
        retry: m.retry_fraction,
        jain: jain_index(&per_station).ok(),
    })
}

/// Saturated bursts for every `(n, window)` cell; medians over repetitions.
pub fn opportunity_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let cells = spec.cells();
    let indexed: Vec<(usize, SweepCell)> = cells.into_iter().enumerate().collect();
    let results = par_map(&indexed, |(idx, cell)| -> Result<SweepRow> {
        let cell_seed = derive_seed(spec.seed, *idx as u64);
        let reps = (0..spec.repetitions)
            .map(|r| run_rep(spec, cell, derive_seed(cell_seed, r as u64)))
            .collect::<Result<Vec<_>>>()?;
        let col = |f: &dyn Fn(&Rep) -> Option<f64>| {
            let xs: Vec<f64> = reps.iter().filter_map(f).collect();
            median(&xs)
        };
        Ok(SweepRow {
            n: cell.n,
            policy: cell.label(),
            cw_min: cell.cw_min,
            cw_max: cell.cw_max,
            controlled: spec.controlled(cell.n),
            median_tp_bps: col(&|r| Some(r.tp)).unwrap_or(0.0),
            median_latency_us: col(&|r| r.latency),
            retry_fraction: col(&|r| Some(r.retry)).unwrap_or(0.0),
            jain: col(&|r| r.jain),
        })
    });
    results.into_iter().collect()
}
