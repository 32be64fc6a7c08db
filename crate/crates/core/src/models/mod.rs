//! Contention-window predictors: the closed-form ABA rule and the
//! log-linear MLBA model with its three estimators.

pub mod aba;
pub mod dnn;
pub mod lr;
pub mod nb;
pub mod quant;
pub mod theory;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mac_sim::CW_LIMIT;

pub use aba::{aba_cw, AbaCw};
pub use dnn::{DnnParams, DnnTrainConfig};
pub use lr::{lr_fit, lr_predict, raw_fit, LrFit, ModelCoefficients};
pub use nb::{nb_fit, nb_predict, NbModel};
pub use quant::QuantScheme;

pub const SNAPSHOT_VERSION: u32 = 1;

/// One CWMax row seen as a supervised example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub alevel: u32,
    pub tlevel: u32,
    pub cwopt: u32,
}

impl TrainingSample {
    pub fn new(alevel: u32, tlevel: u32, cwopt: u32) -> Result<Self> {
        if !(1..=CW_LIMIT).contains(&cwopt) {
            return Err(Error::domain(format!("cwopt {cwopt} outside [1, {CW_LIMIT}]")));
        }
        Ok(TrainingSample { alevel, tlevel, cwopt })
    }

    pub fn features(&self) -> [f64; 2] {
        [self.alevel as f64, self.tlevel as f64]
    }

    pub fn ln_target(&self) -> f64 {
        (self.cwopt as f64).ln()
    }
}

/// Round a real-valued window and clamp it to `[1, 1023]`.
/// Non-finite or oversized values clamp to the top.
pub fn clamp_cw(x: f64) -> u32 {
    if x.is_nan() || x >= CW_LIMIT as f64 {
        return CW_LIMIT;
    }
    (x.round().max(1.0)) as u32
}

/// `round(exp(z))` clamped to the CW range.
pub fn cw_from_log(z: f64) -> u32 {
    if z.is_nan() || z > (CW_LIMIT as f64).ln() + 1.0 {
        return CW_LIMIT;
    }
    clamp_cw(z.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EstimatorKind {
    Lr,
    Nb,
    Dnn,
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" => Ok(EstimatorKind::Lr),
            "nb" => Ok(EstimatorKind::Nb),
            "dnn" => Ok(EstimatorKind::Dnn),
            _ => Err(Error::domain(format!("unknown estimator `{s}`"))),
        }
    }
}

/// A fitted MLBA estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "UPPERCASE")]
pub enum FittedModel {
    Lr(LrFit),
    Nb(NbModel),
    Dnn(DnnParams),
}

impl FittedModel {
    /// Fit `kind` on `samples`. DNN training uses `dnn_cfg`.
    pub fn fit(kind: EstimatorKind, samples: &[TrainingSample], dnn_cfg: &DnnTrainConfig) -> Result<Self> {
        match kind {
            EstimatorKind::Lr => lr_fit(samples).map(FittedModel::Lr),
            EstimatorKind::Nb => nb_fit(samples).map(FittedModel::Nb),
            EstimatorKind::Dnn => dnn::dnn_fit(samples, dnn_cfg).map(FittedModel::Dnn),
        }
    }

    pub fn kind(&self) -> EstimatorKind {
        match self {
            FittedModel::Lr(_) => EstimatorKind::Lr,
            FittedModel::Nb(_) => EstimatorKind::Nb,
            FittedModel::Dnn(_) => EstimatorKind::Dnn,
        }
    }

    pub fn predict(&self, alevel: u32, tlevel: u32) -> u32 {
        let (a, t) = (alevel as f64, tlevel as f64);
        match self {
            FittedModel::Lr(fit) => lr_predict(&fit.coeffs, a, t),
            FittedModel::Nb(m) => nb_predict(m, alevel, tlevel),
            FittedModel::Dnn(p) => p.predict(a, t),
        }
    }

    /// Degenerate fits (intercept-only LR, diverged DNN) are flagged.
    pub fn degenerate(&self) -> bool {
        match self {
            FittedModel::Lr(fit) => fit.degenerate,
            FittedModel::Nb(_) => false,
            FittedModel::Dnn(p) => p.diverged,
        }
    }
}

/// Versioned JSON document for run logs and the status endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub schema_version: u32,
    pub quant: Option<QuantScheme>,
    pub model: Option<serde_json::Value>,
}

impl ModelSnapshot {
    pub fn new(quant: Option<&QuantScheme>, model: Option<&FittedModel>) -> Self {
        ModelSnapshot {
            schema_version: SNAPSHOT_VERSION,
            quant: quant.cloned(),
            model: model.map(|m| match m {
                FittedModel::Dnn(p) => p.to_json(),
                other => serde_json::to_value(other).expect("model serializes"),
            }),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let snap: ModelSnapshot = serde_json::from_str(s)?;
        if snap.schema_version != SNAPSHOT_VERSION {
            return Err(Error::domain(format!(
                "unsupported snapshot version {}",
                snap.schema_version
            )));
        }
        Ok(snap)
    }

    pub fn fitted(&self) -> Result<Option<FittedModel>> {
        let Some(v) = &self.model else { return Ok(None) };
        if v.get("estimator").and_then(|e| e.as_str()) == Some("DNN") {
            return DnnParams::from_json(v).map(|p| Some(FittedModel::Dnn(p)));
        }
        Ok(Some(serde_json::from_value(v.clone())?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamping() {
        assert_eq!(clamp_cw(0.027), 1);
        assert_eq!(clamp_cw(411.6), 412);
        assert_eq!(clamp_cw(1e300), 1023);
        assert_eq!(clamp_cw(f64::INFINITY), 1023);
        assert_eq!(cw_from_log(0.0), 1);
        assert_eq!(cw_from_log(31f64.ln()), 31);
        assert_eq!(cw_from_log(1e6), 1023);
        assert_eq!(cw_from_log(-1e6), 1);
    }

    #[test]
    fn sample_bounds() {
        assert!(TrainingSample::new(1, 1, 0).is_err());
        assert!(TrainingSample::new(1, 1, 1024).is_err());
        assert!(TrainingSample::new(1, 1, 1023).is_ok());
    }

    #[test]
    fn snapshot_round_trip() {
        let samples: Vec<_> = [(1, 1, 15), (2, 3, 63), (1, 5, 31), (2, 2, 127)]
            .iter()
            .map(|&(a, t, c)| TrainingSample::new(a, t, c).unwrap())
            .collect();
        let q = QuantScheme::new(vec![3, 8], 5, vec![1e8, 2e8, 3e8, 4e8]).unwrap();
        for kind in [EstimatorKind::Lr, EstimatorKind::Nb, EstimatorKind::Dnn] {
            let m = FittedModel::fit(kind, &samples, &DnnTrainConfig::default()).unwrap();
            let snap = ModelSnapshot::new(Some(&q), Some(&m));
            let back = ModelSnapshot::from_json_str(&snap.to_json_string()).unwrap();
            let m2 = back.fitted().unwrap().unwrap();
            assert_eq!(m2.kind(), kind);
            for a in 1..=2 {
                for t in 1..=5 {
                    assert_eq!(m.predict(a, t), m2.predict(a, t));
                }
            }
        }
        let bad = r#"{"schema_version":99,"quant":null,"model":null}"#;
        assert!(ModelSnapshot::from_json_str(bad).is_err());
    }
}
