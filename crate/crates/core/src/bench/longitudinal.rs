use serde::{Deserialize, Serialize};

use super::{avg_sigl, derive_seed, median, par_map};
use crate::controller::{ControllerConfig, Policy, ReplayDriver};
use crate::learner::LearnerState;
use crate::error::{Error, Result};
use crate::workload::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start_s: usize,
    pub len_s: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub algorithms: Vec<String>,
    pub windows: Vec<Window>,
    /// `series[alg][window]`: per-period aggregate throughput.
    pub series: Vec<Vec<Vec<f64>>>,
    /// `avg[i][j]`: Avg(i > j), equal-weight mean over windows.
    pub avg: Vec<Vec<f64>>,
    /// `sigl[i][j]`: SigL(i > j) over all windows' periods pooled.
    pub sigl: Vec<Vec<u32>>,
    /// `window_avg[w][i][j]`.
    pub window_avg: Vec<Vec<Vec<f64>>>,
    /// Median per-period throughput of each algorithm, all windows pooled.
    pub medians: Vec<f64>,
}

impl ComparisonResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.algorithms.iter().position(|a| a == name)
    }

    pub fn avg_of(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.avg[self.index(a)?][self.index(b)?])
    }

    pub fn sigl_of(&self, a: &str, b: &str) -> Option<u32> {
        Some(self.sigl[self.index(a)?][self.index(b)?])
    }
}

fn configured(base: &ControllerConfig, policy: Policy, sim_seed: u64, learner_seed: u64) -> ControllerConfig {
    let mut cfg = base.clone();
    cfg.policy = policy;
    cfg.output = None;
    cfg.sim.seed = sim_seed;
    cfg.learner_seed = learner_seed;
    cfg
}

/// Replay every window under every policy with matched seeds and compare
/// the 1 s aggregate-throughput series pairwise. With a `tuning` window,
/// each learning policy first runs online over it and every test window
/// starts from the resulting learner state.
pub fn longitudinal_benchmark(
    trace: &Trace,
    windows: &[Window],
    tuning: Option<Window>,
    algorithms: &[Policy],
    base: &ControllerConfig,
    seed: u64,
) -> Result<ComparisonResult> {
    if windows.is_empty() || algorithms.is_empty() {
        return Err(Error::domain("need at least one window and one algorithm"));
    }
    if let Some(t) = tuning {
        let overlaps = |w: &Window| w.start_s < t.start_s + t.len_s && t.start_s < w.start_s + w.len_s;
        if windows.iter().any(overlaps) {
            return Err(Error::domain("tuning window overlaps a test window"));
        }
    }
    let tuned = par_map(algorithms, |&policy| -> Result<Option<LearnerState>> {
        let (Some(t), Some(_)) = (tuning, policy.estimator()) else {
            return Ok(None);
        };
        let cfg = configured(base, policy, derive_seed(seed, u64::MAX - 1), derive_seed(seed, u64::MAX));
        let mut d = ReplayDriver::new(cfg, trace.window(t.start_s, t.len_s)?)?;
        d.run_to_end()?;
        Ok(d.learner().map(|l| l.state()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let traces = windows
        .iter()
        .map(|w| trace.window(w.start_s, w.len_s))
        .collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for (ai, &policy) in algorithms.iter().enumerate() {
        for wi in 0..windows.len() {
            jobs.push((ai, policy, wi));
        }
    }
    let runs = par_map(&jobs, |&(ai, policy, wi)| -> Result<Vec<f64>> {
        let cfg = configured(base, policy, derive_seed(seed, 2 * wi as u64), derive_seed(seed, 2 * wi as u64 + 1));
        let mut d = ReplayDriver::new(cfg, traces[wi].clone())?;
        if let Some(state) = &tuned[ai] {
            d = d.with_learner_state(state.clone())?;
        }
        d.run_to_end()?;
        Ok(d.finish().aggregate_series())
    });
    let mut series = vec![Vec::with_capacity(windows.len()); algorithms.len()];
    for ((ai, _, _), run) in jobs.iter().zip(runs) {
        series[*ai].push(run?);
    }

    let n = algorithms.len();
    let mut window_avg = vec![vec![vec![0.0; n]; n]; windows.len()];
    let mut avg = vec![vec![0.0; n]; n];
    let mut sigl = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            for w in 0..windows.len() {
                window_avg[w][i][j] = avg_sigl(&series[i][w], &series[j][w])?.avg_pct;
            }
            avg[i][j] = window_avg.iter().map(|m| m[i][j]).sum::<f64>() / windows.len() as f64;
            let a: Vec<f64> = series[i].concat();
            let b: Vec<f64> = series[j].concat();
            sigl[i][j] = avg_sigl(&a, &b)?.sigl;
        }
    }
    let medians = series
        .iter()
        .map(|s| median(&s.concat()).unwrap_or(0.0))
        .collect();
    Ok(ComparisonResult {
        algorithms: algorithms.iter().map(|p| p.name()).collect(),
        windows: windows.to_vec(),
        series,
        avg,
        sigl,
        window_avg,
        medians,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{generate_trace, GenParams};

    #[test]
    fn self_comparison_and_swap_algebra() {
        let trace = generate_trace(&GenParams::uniform(4, 60, 0.1, 0.2, 3)).unwrap();
        let windows = [Window { start_s: 0, len_s: 30 }, Window { start_s: 30, len_s: 30 }];
        let r = longitudinal_benchmark(
            &trace,
            &windows,
            None,
            &[Policy::Beb, Policy::Fixed { cw: 63 }],
            &ControllerConfig::default(),
            5,
        )
        .unwrap();
        assert_eq!(r.avg.len(), 2);
        for i in 0..2 {
            assert_eq!(r.avg[i][i], 0.0);
            assert_eq!(r.sigl[i][i], 100);
        }
        let again = longitudinal_benchmark(
            &trace,
            &windows,
            None,
            &[Policy::Beb, Policy::Fixed { cw: 63 }],
            &ControllerConfig::default(),
            5,
        )
        .unwrap();
        assert_eq!(r, again);
        assert_eq!(r.avg_of("BEB", "BEB"), Some(0.0));
        assert!(r.avg_of("BEB", "ABA").is_none());
    }

    #[test]
    fn tuning_window_must_be_disjoint() {
        let trace = generate_trace(&GenParams::uniform(3, 40, 0.1, 0.2, 3)).unwrap();
        let w = [Window { start_s: 20, len_s: 20 }];
        let cfg = ControllerConfig::default();
        let bad = longitudinal_benchmark(&trace, &w, Some(Window { start_s: 10, len_s: 20 }), &[Policy::Beb], &cfg, 1);
        assert!(bad.is_err());
        let ok = longitudinal_benchmark(&trace, &w, Some(Window { start_s: 0, len_s: 20 }), &[Policy::MlbaLr], &cfg, 1)
            .unwrap();
        assert_eq!(ok.series[0][0].len(), 20);
    }
}
