use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(sum x)^2 / (n * sum x^2)`.
pub fn jain_index(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::domain("jain index of an empty list"));
    }
    if xs.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::domain("jain index needs finite non-negative values"));
    }
    let sum: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    if sq == 0.0 {
        return Err(Error::undefined("jain index of all-zero throughputs"));
    }
    Ok((sum * sum / (xs.len() as f64 * sq)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvgSigl {
    /// Mean of `100 (a_t - b_t) / b_t`.
    pub avg_pct: f64,
    /// Percent of periods where `a_t <= b_t`, rounded up to a multiple of 5.
    pub sigl: u32,
    /// Periods dropped because `b_t` was zero.
    pub excluded: usize,
}

pub fn avg_sigl(a: &[f64], b: &[f64]) -> Result<AvgSigl> {
    if a.len() != b.len() {
        return Err(Error::domain(format!("series lengths differ: {} vs {}", a.len(), b.len())));
    }
    let mut diffs = Vec::with_capacity(a.len());
    let mut not_better = 0usize;
    let mut excluded = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if y == 0.0 {
            excluded += 1;
            continue;
        }
        diffs.push(100.0 * (x - y) / y);
        if x <= y {
            not_better += 1;
        }
    }
    if diffs.is_empty() {
        return Err(Error::undefined("no period with a nonzero baseline"));
    }
    let avg_pct = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let frac = 100.0 * not_better as f64 / diffs.len() as f64;
    // Guard against 25.000000000000004 rounding up to 30.
    let sigl = (((frac - 1e-9) / 5.0).ceil().max(0.0) * 5.0) as u32;
    Ok(AvgSigl {
        avg_pct,
        sigl,
        excluded,
    })
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    let mut v = xs.to_vec();
    crate::mac_sim::median(&mut v)
}

/// Mean and half-width of a normal-approximation 95% band.
pub fn mean_ci95(xs: &[f64]) -> Option<(f64, f64)> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some((m, 0.0));
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    Some((m, 1.96 * var.sqrt() / (xs.len() as f64).sqrt()))
}
