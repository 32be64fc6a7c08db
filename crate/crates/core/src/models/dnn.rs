//! Two-hidden-layer ReLU regressor on standardized `(alevel, tlevel)`,
//! trained with adam on squared error of `ln(cwopt)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{cw_from_log, TrainingSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnTrainConfig {
    pub hidden: [usize; 2],
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for DnnTrainConfig {
    fn default() -> Self {
        DnnTrainConfig {
            hidden: [10, 10],
            epochs: 300,
            batch_size: 1,
            learning_rate: 1e-3,
            seed: 17,
        }
    }
}

/// Weights live in one flat vector:
/// `W1 (h1 x 2) | b1 (h1) | W2 (h2 x h1) | b2 (h2) | w (h2) | b3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnParams {
    pub sizes: [usize; 4],
    pub theta: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub feature_mean: [f64; 2],
    pub feature_std: [f64; 2],
    /// Set once an epoch hit a non-finite loss and was rolled back.
    pub diverged: bool,
}

/// Regression row: raw features and `ln(cwopt)` target.
pub type Row = ([f64; 2], f64);

pub fn rows_of(samples: &[TrainingSample]) -> Vec<Row> {
    samples.iter().map(|s| (s.features(), s.ln_target())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    /// Mean minibatch loss; NaN when the epoch was rolled back.
    pub loss: f64,
    pub diverged: bool,
}

struct Layout {
    h1: usize,
    h2: usize,
}

impl Layout {
    fn w1(&self) -> usize {
        0
    }
    fn b1(&self) -> usize {
        2 * self.h1
    }
    fn w2(&self) -> usize {
        self.b1() + self.h1
    }
    fn b2(&self) -> usize {
        self.w2() + self.h2 * self.h1
    }
    fn w3(&self) -> usize {
        self.b2() + self.h2
    }
    fn b3(&self) -> usize {
        self.w3() + self.h2
    }
    fn len(&self) -> usize {
        self.b3() + 1
    }
}

pub fn dnn_init(layer_sizes: &[usize], seed: u64) -> Result<DnnParams> {
    let sizes: [usize; 4] = layer_sizes
        .try_into()
        .map_err(|_| Error::domain("layer sizes must be [2, h1, h2, 1]"))?;
    if sizes[0] != 2 || sizes[3] != 1 || sizes[1] == 0 || sizes[2] == 0 {
        return Err(Error::domain("layer sizes must be [2, h1, h2, 1] with h1, h2 >= 1"));
    }
    let lay = Layout { h1: sizes[1], h2: sizes[2] };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; lay.len()];
    let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
        let he = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
        for w in &mut theta[range] {
            *w = he.sample(&mut rng);
        }
    };
    fill(lay.w1()..lay.b1(), 2);
    fill(lay.w2()..lay.b2(), lay.h1);
    fill(lay.w3()..lay.b3(), lay.h2);
    let n = theta.len();
    Ok(DnnParams {
        sizes,
        theta,
        adam_m: vec![0.0; n],
        adam_v: vec![0.0; n],
        adam_step: 0,
        learning_rate: 1e-3,
        beta1: 0.9,
        beta2: 0.999,
        eps_adam: 1e-8,
        feature_mean: [0.0; 2],
        feature_std: [1.0; 2],
        diverged: false,
    })
}

impl DnnParams {
    fn layout(&self) -> Layout {
        Layout {
            h1: self.sizes[1],
            h2: self.sizes[2],
        }
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    /// Set z-score statistics from the training window.
    pub fn standardize_on(&mut self, rows: &[Row]) {
        if rows.is_empty() {
            return;
        }
        let n = rows.len() as f64;
        for k in 0..2 {
            let mean = rows.iter().map(|r| r.0[k]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r.0[k] - mean).powi(2)).sum::<f64>() / n;
            self.feature_mean[k] = mean;
            self.feature_std[k] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
    }

    fn standardized(&self, x: [f64; 2]) -> [f64; 2] {
        [
            (x[0] - self.feature_mean[0]) / self.feature_std[0],
            (x[1] - self.feature_mean[1]) / self.feature_std[1],
        ]
    }

    /// Network output (predicted `ln CW`) for raw features.
    pub fn forward(&self, alevel: f64, tlevel: f64) -> f64 {
        self.forward_theta(&self.theta, self.standardized([alevel, tlevel]))
    }

    fn forward_theta(&self, th: &[f64], z: [f64; 2]) -> f64 {
        let lay = self.layout();
        let h1: Vec<f64> = (0..lay.h1)
            .map(|i| {
                let a = th[lay.b1() + i] + th[lay.w1() + 2 * i] * z[0] + th[lay.w1() + 2 * i + 1] * z[1];
                a.max(0.0)
            })
            .collect();
        let mut out = th[lay.b3()];
        for i in 0..lay.h2 {
            let row = &th[lay.w2() + i * lay.h1..lay.w2() + (i + 1) * lay.h1];
            let a = th[lay.b2() + i] + row.iter().zip(&h1).map(|(w, h)| w * h).sum::<f64>();
            out += th[lay.w3() + i] * a.max(0.0);
        }
        out
    }

    pub fn predict(&self, alevel: f64, tlevel: f64) -> u32 {
        cw_from_log(self.forward(alevel, tlevel))
    }

    /// Mean squared error of `ln(cwopt)` and its gradient.
    pub fn loss_and_grad(&self, rows: &[Row]) -> (f64, Vec<f64>) {
        let lay = self.layout();
        let th = &self.theta;
        let mut g = vec![0.0; th.len()];
        let mut loss = 0.0;
        let scale = 1.0 / rows.len().max(1) as f64;
        let mut a1 = vec![0.0; lay.h1];
        let mut h1 = vec![0.0; lay.h1];
        let mut a2 = vec![0.0; lay.h2];
        let mut h2 = vec![0.0; lay.h2];
        let mut dh1 = vec![0.0; lay.h1];
        for &(x, y) in rows {
            let z = self.standardized(x);
            for i in 0..lay.h1 {
                a1[i] = th[lay.b1() + i] + th[lay.w1() + 2 * i] * z[0] + th[lay.w1() + 2 * i + 1] * z[1];
                h1[i] = a1[i].max(0.0);
            }
            let mut out = th[lay.b3()];
            for i in 0..lay.h2 {
                let row = &th[lay.w2() + i * lay.h1..lay.w2() + (i + 1) * lay.h1];
                a2[i] = th[lay.b2() + i] + row.iter().zip(&h1).map(|(w, h)| w * h).sum::<f64>();
                h2[i] = a2[i].max(0.0);
                out += th[lay.w3() + i] * h2[i];
            }
            let err = out - y;
            loss += err * err * scale;
            let d = 2.0 * err * scale;

            g[lay.b3()] += d;
            dh1.iter_mut().for_each(|x| *x = 0.0);
            for i in 0..lay.h2 {
                g[lay.w3() + i] += d * h2[i];
                if a2[i] <= 0.0 {
                    continue;
                }
                let da2 = d * th[lay.w3() + i];
                g[lay.b2() + i] += da2;
                for j in 0..lay.h1 {
                    g[lay.w2() + i * lay.h1 + j] += da2 * h1[j];
                    dh1[j] += th[lay.w2() + i * lay.h1 + j] * da2;
                }
            }
            for i in 0..lay.h1 {
                if a1[i] <= 0.0 {
                    continue;
                }
                g[lay.b1() + i] += dh1[i];
                g[lay.w1() + 2 * i] += dh1[i] * z[0];
                g[lay.w1() + 2 * i + 1] += dh1[i] * z[1];
            }
        }
        (loss, g)
    }

    pub fn mse(&self, rows: &[Row]) -> f64 {
        self.loss_and_grad(rows).0
    }

    fn adam_update(&mut self, grad: &[f64]) {
        self.adam_step += 1;
        let t = self.adam_step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for k in 0..self.theta.len() {
            self.adam_m[k] = self.beta1 * self.adam_m[k] + (1.0 - self.beta1) * grad[k];
            self.adam_v[k] = self.beta2 * self.adam_v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            let mhat = self.adam_m[k] / c1;
            let vhat = self.adam_v[k] / c2;
            self.theta[k] -= self.learning_rate * mhat / (vhat.sqrt() + self.eps_adam);
        }
    }

    /// One pass over `samples` in order, in minibatches of `batch_size`.
    /// A non-finite loss rolls the epoch back and halves the learning rate.
    pub fn train_epoch(&mut self, rows: &[Row], batch_size: usize) -> Result<EpochReport> {
        if rows.is_empty() {
            return Err(Error::domain("cannot train on an empty sample set"));
        }
        if batch_size == 0 {
            return Err(Error::domain("batch_size must be >= 1"));
        }
        let saved = (self.theta.clone(), self.adam_m.clone(), self.adam_v.clone(), self.adam_step);
        let mut total = 0.0;
        let mut batches = 0;
        for batch in rows.chunks(batch_size) {
            let (loss, grad) = self.loss_and_grad(batch);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                (self.theta, self.adam_m, self.adam_v, self.adam_step) = saved;
                self.learning_rate /= 2.0;
                self.diverged = true;
                return Ok(EpochReport {
                    loss: f64::NAN,
                    diverged: true,
                });
            }
            self.adam_update(&grad);
            if self.theta.iter().any(|w| !w.is_finite()) {
                (self.theta, self.adam_m, self.adam_v, self.adam_step) = saved;
                self.learning_rate /= 2.0;
                self.diverged = true;
                return Ok(EpochReport {
                    loss: f64::NAN,
                    diverged: true,
                });
            }
            total += loss;
            batches += 1;
        }
        Ok(EpochReport {
            loss: total / batches as f64,
            diverged: false,
        })
    }

    /// Nested-array form for snapshots.
    pub fn to_json(&self) -> serde_json::Value {
        let lay = self.layout();
        let th = &self.theta;
        let rows = |start: usize, n_rows: usize, n_cols: usize| -> Vec<Vec<f64>> {
            (0..n_rows)
                .map(|r| th[start + r * n_cols..start + (r + 1) * n_cols].to_vec())
                .collect()
        };
        json!({
            "estimator": "DNN",
            "layer_sizes": self.sizes,
            "W1": rows(lay.w1(), lay.h1, 2),
            "b1": th[lay.b1()..lay.w2()],
            "W2": rows(lay.w2(), lay.h2, lay.h1),
            "b2": th[lay.b2()..lay.w3()],
            "w": th[lay.w3()..lay.b3()],
            "b3": th[lay.b3()],
            "feature_mean": self.feature_mean,
            "feature_std": self.feature_std,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps_adam": self.eps_adam,
            "adam_step": self.adam_step,
            "adam_m": self.adam_m,
            "adam_v": self.adam_v,
            "diverged": self.diverged,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<DnnParams> {
        #[derive(Deserialize)]
        struct Doc {
            layer_sizes: Vec<usize>,
            #[serde(rename = "W1")]
            w1: Vec<Vec<f64>>,
            b1: Vec<f64>,
            #[serde(rename = "W2")]
            w2: Vec<Vec<f64>>,
            b2: Vec<f64>,
            w: Vec<f64>,
            b3: f64,
            feature_mean: [f64; 2],
            feature_std: [f64; 2],
            learning_rate: f64,
            beta1: f64,
            beta2: f64,
            eps_adam: f64,
            adam_step: u64,
            adam_m: Vec<f64>,
            adam_v: Vec<f64>,
            diverged: bool,
        }
        let d: Doc = serde_json::from_value(v.clone())?;
        let mut p = dnn_init(&d.layer_sizes, 0)?;
        let theta: Vec<f64> = d
            .w1
            .into_iter()
            .flatten()
            .chain(d.b1)
            .chain(d.w2.into_iter().flatten())
            .chain(d.b2)
            .chain(d.w)
            .chain(std::iter::once(d.b3))
            .collect();
        if theta.len() != p.n_params() || d.adam_m.len() != p.n_params() || d.adam_v.len() != p.n_params() {
            return Err(Error::domain("DNN tensor shapes do not match layer sizes"));
        }
        p.theta = theta;
        p.adam_m = d.adam_m;
        p.adam_v = d.adam_v;
        p.adam_step = d.adam_step;
        p.learning_rate = d.learning_rate;
        p.beta1 = d.beta1;
        p.beta2 = d.beta2;
        p.eps_adam = d.eps_adam;
        p.feature_mean = d.feature_mean;
        p.feature_std = d.feature_std;
        p.diverged = d.diverged;
        Ok(p)
    }
}

/// Fresh network fitted to `samples`: z-scores from the samples, output
/// bias started at the mean target, then `epochs` of adam.
pub fn dnn_fit(samples: &[TrainingSample], cfg: &DnnTrainConfig) -> Result<DnnParams> {
    dnn_fit_rows(&rows_of(samples), cfg)
}

pub fn dnn_fit_rows(rows: &[Row], cfg: &DnnTrainConfig) -> Result<DnnParams> {
    if rows.is_empty() {
        return Err(Error::domain("cannot fit a network on zero samples"));
    }
    let mut p = dnn_init(&[2, cfg.hidden[0], cfg.hidden[1], 1], cfg.seed)?;
    p.learning_rate = cfg.learning_rate;
    p.standardize_on(rows);
    let b3 = p.layout().b3();
    p.theta[b3] = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    for _ in 0..cfg.epochs {
        p.train_epoch(rows, cfg.batch_size)?;
    }
    Ok(p)
}
