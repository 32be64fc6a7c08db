//! Experiment harness: CW sweeps, exhaustive calibration, training-speed
//! curves and the longitudinal Avg/SigL comparison.

mod calibrate;
mod longitudinal;
mod stats;
mod suite;
mod sweep;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub use calibrate::{
    exhaustive_calibration, log_vs_raw_r2, snap_to_grid, training_speed_sim, CalibRow, R2Comparison,
    SpeedAlgorithm, TrainSpeedConfig, TrainSpeedRow,
};
pub use longitudinal::{longitudinal_benchmark, ComparisonResult, Window};
pub use stats::{avg_sigl, jain_index, mean, mean_ci95, median, AvgSigl};
pub use suite::{run_bench, BenchConfig, BenchReport};
pub use sweep::{opportunity_sweep, SweepCell, SweepRow, SweepSpec};

/// Seed for item `index` of a run seeded with `master` (splitmix64).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Map `f` over `items` on scoped threads; output order follows input order.
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| {
                let f = &f;
                s.spawn(move || c.iter().map(f).collect::<Vec<U>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("bench worker panicked"))
            .collect()
    })
}

/// Write serializable rows as CSV with a header line.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::io("<csv>", std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn save_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(rows, std::io::BufWriter::new(f))
}

/// One JSON document per line.
pub fn save_ndjson<T: Serialize>(items: &[T], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_and_repeat() {
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(7, 4));
        assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
    }

    #[test]
    fn par_map_keeps_order() {
        let xs: Vec<u64> = (0..103).collect();
        assert_eq!(par_map(&xs, |x| x * 2), xs.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(par_map(&[] as &[u64], |x| *x).is_empty());
    }
}
