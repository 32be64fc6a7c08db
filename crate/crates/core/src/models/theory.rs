//! Saturated-contention approximations used as reference values.

use crate::error::{Error, Result};

/// Approximate per-slot attempt probability of a saturated station,
/// `2 / (cw + 1)`.
pub fn attempt_probability(cw: u32) -> f64 {
    2.0 / (cw as f64 + 1.0)
}

/// `p_i * prod_{j != i} (1 - p_j)`.
pub fn expected_throughput_share(p: &[f64], i: usize) -> Result<f64> {
    if i >= p.len() {
        return Err(Error::domain(format!("station {i} out of range for {} stations", p.len())));
    }
    if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::domain(format!("probability {bad} outside [0, 1]")));
    }
    Ok(p.iter()
        .enumerate()
        .map(|(j, &pj)| if j == i { pj } else { 1.0 - pj })
        .product())
}

/// Shares normalized to sum to one.
pub fn normalized_shares(p: &[f64]) -> Result<Vec<f64>> {
    let raw = (0..p.len())
        .map(|i| expected_throughput_share(p, i))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::undefined("all expected shares are zero"));
    }
    Ok(raw.into_iter().map(|x| x / total).collect())
}
