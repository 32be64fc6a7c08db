use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps raw (actives, throughput) to the 1-based (alevel, tlevel) key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantScheme {
    pub alevel_boundaries: Vec<u32>,
    pub tlevel_count: usize,
    /// Up to `tlevel_count - 1` throughput cut points in bits/s.
    pub tlevel_boundaries: Vec<f64>,
}

impl Default for QuantScheme {
    fn default() -> Self {
        QuantScheme {
            alevel_boundaries: vec![3, 8],
            tlevel_count: 5,
            tlevel_boundaries: Vec::new(),
        }
    }
}

fn strictly_increasing<T: PartialOrd>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

impl QuantScheme {
    pub fn new(alevel_boundaries: Vec<u32>, tlevel_count: usize, tlevel_boundaries: Vec<f64>) -> Result<Self> {
        let q = QuantScheme {
            alevel_boundaries,
            tlevel_count,
            tlevel_boundaries,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alevel_boundaries.is_empty() || !strictly_increasing(&self.alevel_boundaries) {
            return Err(Error::domain("alevel boundaries must be nonempty and strictly increasing"));
        }
        if self.tlevel_count == 0 {
            return Err(Error::domain("tlevel_count must be >= 1"));
        }
        if self.tlevel_boundaries.len() >= self.tlevel_count.max(1)
            || !strictly_increasing(&self.tlevel_boundaries)
            || self.tlevel_boundaries.iter().any(|b| !b.is_finite())
        {
            return Err(Error::domain(
                "tlevel boundaries must be finite, strictly increasing, fewer than tlevel_count",
            ));
        }
        Ok(())
    }

    pub fn alevels(&self) -> u32 {
        self.alevel_boundaries.len() as u32
    }

    /// 1-based index of the first boundary >= `actives`; past the last
    /// boundary maps to the top level.
    pub fn alevel(&self, actives: u32) -> u32 {
        let idx = self.alevel_boundaries.partition_point(|&b| b < actives);
        (idx.min(self.alevel_boundaries.len() - 1) + 1) as u32
    }

    /// `1 + #{b : tp >= b}`.
    pub fn tlevel(&self, tp: f64) -> u32 {
        (self.tlevel_boundaries.partition_point(|&b| b <= tp) + 1) as u32
    }

    pub fn quantize(&self, actives: u32, tp: f64) -> (u32, u32) {
        (self.alevel(actives), self.tlevel(tp))
    }

    /// Recompute tlevel cut points at the `k/tlevel_count` percentiles of
    /// `tps` (linear interpolation). Repeated cut points are merged and cut
    /// points at the minimum dropped, so the smallest value is level 1.
    pub fn refresh_percentiles(&mut self, tps: &[f64]) {
        self.tlevel_boundaries = percentile_boundaries(tps, self.tlevel_count);
    }

    pub fn scaled(&self, factor: f64) -> QuantScheme {
        QuantScheme {
            tlevel_boundaries: self.tlevel_boundaries.iter().map(|b| b * factor).collect(),
            ..self.clone()
        }
    }
}

pub fn percentile_boundaries(values: &[f64], levels: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if xs.is_empty() || levels < 2 {
        return Vec::new();
    }
    xs.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(levels - 1);
    for k in 1..levels {
        let b = quantile_sorted(&xs, k as f64 / levels as f64);
        if b > xs[0] && out.last().is_none_or(|&last| b > last) {
            out.push(b);
        }
    }
    out
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    xs[lo] + (xs[hi] - xs[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alevels_default_split() {
        let q = QuantScheme::default();
        assert_eq!(q.alevel(0), 1);
        assert_eq!(q.alevel(2), 1);
        assert_eq!(q.alevel(3), 1);
        assert_eq!(q.alevel(4), 2);
        assert_eq!(q.alevel(5), 2);
        assert_eq!(q.alevel(8), 2);
        assert_eq!(q.alevel(40), 2);
    }

    #[test]
    fn tlevels() {
        let q = QuantScheme::new(vec![3, 8], 5, vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        assert_eq!(q.tlevel(0.0), 1);
        assert_eq!(q.tlevel(9.99), 1);
        assert_eq!(q.tlevel(10.0), 2);
        assert_eq!(q.tlevel(39.0), 4);
        assert_eq!(q.tlevel(1e12), 5);
        assert_eq!(QuantScheme::default().tlevel(123.0), 1);
    }

    #[test]
    fn percentiles() {
        let xs: Vec<f64> = (1..=101).map(|x| x as f64).collect();
        assert_eq!(percentile_boundaries(&xs, 5), vec![21.0, 41.0, 61.0, 81.0]);
        assert!(percentile_boundaries(&[7.0; 9], 5).is_empty());
        let b = percentile_boundaries(&[1.0, 1.0, 1.0, 1.0, 9.0], 5);
        assert_eq!(b.len(), 1);
        assert!((b[0] - 2.6).abs() < 1e-12);
        assert!(percentile_boundaries(&[], 5).is_empty());
    }

    #[test]
    fn invalid() {
        assert!(QuantScheme::new(vec![], 5, vec![]).is_err());
        assert!(QuantScheme::new(vec![3, 3], 5, vec![]).is_err());
        assert!(QuantScheme::new(vec![3], 0, vec![]).is_err());
        assert!(QuantScheme::new(vec![3], 2, vec![1.0, 2.0]).is_err());
    }
}
