use serde::{Deserialize, Serialize};

use super::{cw_from_log, TrainingSample};
use crate::error::{Error, Result};

/// `ln CW = theta0 + theta1 * x1 + theta2 * x2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCoefficients {
    pub theta0: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl ModelCoefficients {
    pub fn new(theta0: f64, theta1: f64, theta2: f64) -> Result<Self> {
        if ![theta0, theta1, theta2].iter().all(|t| t.is_finite()) {
            return Err(Error::domain("coefficients must be finite"));
        }
        Ok(ModelCoefficients { theta0, theta1, theta2 })
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.theta0 + self.theta1 * x1 + self.theta2 * x2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrFit {
    pub coeffs: ModelCoefficients,
    /// Rank-deficient design: only the intercept was fitted.
    pub degenerate: bool,
    /// `None` when the response has zero variance.
    pub r_squared: Option<f64>,
}

/// Least squares of `y` on two regressors plus intercept, solved on
/// centered normal equations. A singular design falls back to the mean.
pub fn ols(x: &[[f64; 2]], y: &[f64]) -> Result<LrFit> {
    if x.len() != y.len() {
        return Err(Error::domain("feature and response lengths differ"));
    }
    if y.is_empty() {
        return Err(Error::domain("no samples to fit"));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite sample"));
    }
    let n = y.len() as f64;
    let mx = [
        x.iter().map(|r| r[0]).sum::<f64>() / n,
        x.iter().map(|r| r[1]).sum::<f64>() / n,
    ];
    let my = y.iter().sum::<f64>() / n;

    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (r, &yy) in x.iter().zip(y) {
        let (d1, d2, dy) = (r[0] - mx[0], r[1] - mx[1], yy - my);
        s11 += d1 * d1;
        s12 += d1 * d2;
        s22 += d2 * d2;
        s1y += d1 * dy;
        s2y += d2 * dy;
    }
    let det = s11 * s22 - s12 * s12;
    let singular = y.len() < 3 || s11 <= 0.0 || s22 <= 0.0 || det <= 1e-10 * s11 * s22;

    let coeffs = if singular {
        ModelCoefficients::new(my, 0.0, 0.0)?
    } else {
        let t1 = (s22 * s1y - s12 * s2y) / det;
        let t2 = (s11 * s2y - s12 * s1y) / det;
        ModelCoefficients::new(my - t1 * mx[0] - t2 * mx[1], t1, t2)?
    };
    Ok(LrFit {
        coeffs,
        degenerate: singular,
        r_squared: r_squared(&coeffs, x, y),
    })
}

pub fn r_squared(coeffs: &ModelCoefficients, x: &[[f64; 2]], y: &[f64]) -> Option<f64> {
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if ss_tot <= 0.0 {
        return None;
    }
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(r, v)| (v - coeffs.eval(r[0], r[1])).powi(2))
        .sum();
    Some(1.0 - ss_res / ss_tot)
}

/// OLS of `ln(cwopt)` on `(alevel, tlevel)`.
pub fn lr_fit(samples: &[TrainingSample]) -> Result<LrFit> {
    let x: Vec<[f64; 2]> = samples.iter().map(TrainingSample::features).collect();
    let y: Vec<f64> = samples.iter().map(TrainingSample::ln_target).collect();
    ols(&x, &y)
}

/// Raw-feature fit on `(a, tp)`, with or without the log transform of the
/// response. Used for the goodness-of-fit comparison.
pub fn raw_fit(a: &[f64], tp: &[f64], cwopt: &[u32], log_response: bool) -> Result<LrFit> {
    if a.len() != tp.len() || a.len() != cwopt.len() {
        return Err(Error::domain("column lengths differ"));
    }
    let x: Vec<[f64; 2]> = a.iter().zip(tp).map(|(&a, &t)| [a, t]).collect();
    let y: Vec<f64> = cwopt
        .iter()
        .map(|&c| if log_response { (c as f64).ln() } else { c as f64 })
        .collect();
    ols(&x, &y)
}

/// `round(exp(theta . x))`, clamped to `[1, 1023]`.
pub fn lr_predict(coeffs: &ModelCoefficients, x1: f64, x2: f64) -> u32 {
    cw_from_log(coeffs.eval(x1, x2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(theta: (f64, f64, f64)) -> (Vec<[f64; 2]>, Vec<f64>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for a in 1..=2 {
            for t in 1..=5 {
                x.push([a as f64, t as f64]);
                y.push(theta.0 + theta.1 * a as f64 + theta.2 * t as f64);
            }
        }
        (x, y)
    }

    #[test]
    fn recovers_generating_coefficients() {
        let (x, y) = grid((0.5, 0.3, 0.1));
        let fit = ols(&x, &y).unwrap();
        assert!(!fit.degenerate);
        assert!((fit.coeffs.theta0 - 0.5).abs() < 1e-9);
        assert!((fit.coeffs.theta1 - 0.3).abs() < 1e-9);
        assert!((fit.coeffs.theta2 - 0.1).abs() < 1e-9);
        assert!((fit.r_squared.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response() {
        let samples: Vec<_> = (1..=2)
            .flat_map(|a| (1..=5).map(move |t| TrainingSample::new(a, t, 31).unwrap()))
            .collect();
        let fit = lr_fit(&samples).unwrap();
        assert!((fit.coeffs.theta0 - 31f64.ln()).abs() < 1e-12);
        assert!(fit.coeffs.theta1.abs() < 1e-12 && fit.coeffs.theta2.abs() < 1e-12);
        assert_eq!(fit.r_squared, None);
    }

    #[test]
    fn three_points_interpolate() {
        // By hand: (1,1)->1, (2,1)->3, (1,2)->4 gives
        // theta1 = 2, theta2 = 3, theta0 = 1 - 2 - 3 = -4.
        let x = [[1.0, 1.0], [2.0, 1.0], [1.0, 2.0]];
        let y = [1.0, 3.0, 4.0];
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coeffs.theta0 + 4.0).abs() < 1e-12);
        assert!((fit.coeffs.theta1 - 2.0).abs() < 1e-12);
        assert!((fit.coeffs.theta2 - 3.0).abs() < 1e-12);
        for (r, v) in x.iter().zip(y) {
            assert!((fit.coeffs.eval(r[0], r[1]) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_falls_back() {
        let x = [[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]];
        let y = [1.0, 2.0, 3.0, 6.0];
        let fit = ols(&x, &y).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.coeffs.theta0, 3.0);
        assert_eq!((fit.coeffs.theta1, fit.coeffs.theta2), (0.0, 0.0));

        let one = lr_fit(&[TrainingSample::new(2, 3, 63).unwrap()]).unwrap();
        assert!(one.degenerate);
        assert_eq!(lr_predict(&one.coeffs, 1.0, 5.0), 63);
        assert!(lr_fit(&[]).is_err());
    }

    #[test]
    fn predictions() {
        let zero = ModelCoefficients::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(lr_predict(&zero, 2.0, 4.0), 1);
        let raw_fit = ModelCoefficients::new(-3.6, 0.19, 2.7e-8).unwrap();
        assert_eq!(lr_predict(&raw_fit, 8.0, 3.0e8), 412);
        let small = ModelCoefficients::new(-3.6, 0.0, 0.0).unwrap();
        assert_eq!(lr_predict(&small, 8.0, 3.0e8), 1);
        let huge = ModelCoefficients::new(500.0, 0.0, 0.0).unwrap();
        assert_eq!(lr_predict(&huge, 0.0, 0.0), 1023);
        assert!(ModelCoefficients::new(f64::NAN, 0.0, 0.0).is_err());
    }
}
