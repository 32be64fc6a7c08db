use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TrainingSample;
use crate::error::{Error, Result};

pub const LAPLACE_ALPHA: f64 = 1.0;

/// Factorized naive-Bayes classifier over CW classes with features
/// `alevel` and `tlevel`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub alpha: f64,
    /// CW classes in increasing order.
    pub classes: Vec<u32>,
    pub class_counts: Vec<u64>,
    /// Feature domain sizes used for smoothing: levels are `1..=domain`.
    pub alevel_domain: u32,
    pub tlevel_domain: u32,
    /// `alevel_counts[c][a-1]`: count of class `c` samples at alevel `a`.
    pub alevel_counts: Vec<Vec<u64>>,
    pub tlevel_counts: Vec<Vec<u64>>,
}

pub fn nb_fit(samples: &[TrainingSample]) -> Result<NbModel> {
    let a_dom = samples.iter().map(|s| s.alevel).max().unwrap_or(0).max(1);
    let t_dom = samples.iter().map(|s| s.tlevel).max().unwrap_or(0).max(1);
    nb_fit_with_domain(samples, a_dom, t_dom, LAPLACE_ALPHA)
}

pub fn nb_fit_with_domain(
    samples: &[TrainingSample],
    alevel_domain: u32,
    tlevel_domain: u32,
    alpha: f64,
) -> Result<NbModel> {
    if samples.is_empty() {
        return Err(Error::domain("naive Bayes needs at least one sample"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain("smoothing constant must be positive"));
    }
    if let Some(s) = samples
        .iter()
        .find(|s| s.alevel == 0 || s.tlevel == 0 || s.alevel > alevel_domain || s.tlevel > tlevel_domain)
    {
        return Err(Error::domain(format!(
            "levels ({}, {}) outside domain {alevel_domain}x{tlevel_domain}",
            s.alevel, s.tlevel
        )));
    }
    let mut by_class: BTreeMap<u32, Vec<&TrainingSample>> = BTreeMap::new();
    for s in samples {
        by_class.entry(s.cwopt).or_default().push(s);
    }
    let mut m = NbModel {
        alpha,
        classes: Vec::new(),
        class_counts: Vec::new(),
        alevel_domain,
        tlevel_domain,
        alevel_counts: Vec::new(),
        tlevel_counts: Vec::new(),
    };
    for (cw, members) in by_class {
        let mut ac = vec![0u64; alevel_domain as usize];
        let mut tc = vec![0u64; tlevel_domain as usize];
        for s in &members {
            ac[s.alevel as usize - 1] += 1;
            tc[s.tlevel as usize - 1] += 1;
        }
        m.classes.push(cw);
        m.class_counts.push(members.len() as u64);
        m.alevel_counts.push(ac);
        m.tlevel_counts.push(tc);
    }
    Ok(m)
}

impl NbModel {
    pub fn total(&self) -> u64 {
        self.class_counts.iter().sum()
    }

    pub fn prior(&self, c: usize) -> f64 {
        self.class_counts[c] as f64 / self.total() as f64
    }

    /// Smoothed `P(alevel | class c)`; levels outside the domain get the
    /// unseen-value mass.
    pub fn p_alevel(&self, c: usize, alevel: u32) -> f64 {
        smoothed(&self.alevel_counts[c], self.class_counts[c], alevel, self.alpha)
    }

    pub fn p_tlevel(&self, c: usize, tlevel: u32) -> f64 {
        smoothed(&self.tlevel_counts[c], self.class_counts[c], tlevel, self.alpha)
    }

    /// Log of `P(a|c) P(t|c) P(c)` per class.
    pub fn log_scores(&self, alevel: u32, tlevel: u32) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| self.prior(c).ln() + self.p_alevel(c, alevel).ln() + self.p_tlevel(c, tlevel).ln())
            .collect()
    }
}

fn smoothed(counts: &[u64], n_class: u64, level: u32, alpha: f64) -> f64 {
    let hit = level
        .checked_sub(1)
        .and_then(|i| counts.get(i as usize))
        .copied()
        .unwrap_or(0);
    (hit as f64 + alpha) / (n_class as f64 + alpha * counts.len() as f64)
}

/// Log scores closer than this are treated as tied; equal products reached
/// through different factor orders can differ in the last bits.
const TIE_EPS: f64 = 1e-12;

/// Class maximizing `P(s|CW) P(CW)`; ties go to the smaller CW.
pub fn nb_predict(model: &NbModel, alevel: u32, tlevel: u32) -> u32 {
    let scores = model.log_scores(alevel, tlevel);
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] + TIE_EPS {
            best = c;
        }
    }
    model.classes[best]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(a: u32, t: u32, c: u32) -> TrainingSample {
        TrainingSample::new(a, t, c).unwrap()
    }

    #[test]
    fn single_class() {
        let m = nb_fit(&[s(1, 1, 15)]).unwrap();
        assert_eq!(nb_predict(&m, 1, 1), 15);
        assert_eq!(nb_predict(&m, 2, 5), 15);
    }

    #[test]
    fn likelihood_decides_under_equal_priors() {
        // A=31 seen 3x at (1,1); B=63 seen once there and twice at (2,2).
        // P(1|A)^2 = (4/5)^2 vs P(1|B)^2 = (2/5)^2, so A wins.
        let m = nb_fit(&[
            s(1, 1, 31),
            s(1, 1, 31),
            s(1, 1, 31),
            s(1, 1, 63),
            s(2, 2, 63),
            s(2, 2, 63),
        ])
        .unwrap();
        assert_eq!(m.prior(0), m.prior(1));
        assert_eq!(nb_predict(&m, 1, 1), 31);
        assert_eq!(nb_predict(&m, 2, 2), 63);
    }

    #[test]
    fn ties_prefer_smaller() {
        let m = nb_fit(&[s(1, 1, 63), s(1, 1, 7)]).unwrap();
        assert_eq!(nb_predict(&m, 1, 1), 7);
    }

    #[test]
    fn smoothed_probabilities() {
        let m = nb_fit(&[s(1, 1, 15), s(2, 3, 15), s(2, 2, 31)]).unwrap();
        for c in 0..m.classes.len() {
            let sum: f64 = (1..=m.alevel_domain).map(|a| m.p_alevel(c, a)).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for t in 1..=m.tlevel_domain {
                assert!(m.p_tlevel(c, t) > 0.0);
            }
        }
        let priors: f64 = (0..m.classes.len()).map(|c| m.prior(c)).sum();
        assert!((priors - 1.0).abs() < 1e-12);
        // Unseen states still classify.
        let _ = nb_predict(&m, 9, 9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(nb_fit(&[]).is_err());
        assert!(nb_fit_with_domain(&[s(3, 1, 15)], 2, 5, 1.0).is_err());
        assert!(nb_fit_with_domain(&[s(1, 1, 15)], 2, 5, 0.0).is_err());
    }
}
