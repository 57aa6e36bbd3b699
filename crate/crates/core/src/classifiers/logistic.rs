//! Logistic regression trained on summed binary cross-entropy with an L2
//! penalty, full-batch Adam.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::encoder::Adam;
use crate::{class_counts, Error, FeatureMatrix, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: LogisticConfig,
}

/// Overflow-free logistic function.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + libm::log1p(libm::exp(-t))
    } else {
        libm::log1p(libm::exp(t))
    }
}

fn logit(w: &[f64], b: f64, row: &[f64]) -> f64 {
    w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>() + b
}

/// `−Σ[y log ŷ + (1−y) log(1−ŷ)] + (λ/2)‖w‖²` and its gradient
/// `(∂/∂w, ∂/∂b)`. Uses `−log ŷ = softplus(−t)`, `−log(1−ŷ) = softplus(t)`.
pub fn logistic_loss_and_grad(
    w: &[f64],
    b: f64,
    x: &FeatureMatrix,
    y: &[Label],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let mut loss = 0.0;
    let mut gw = alloc::vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &label) in x.rows().zip(y) {
        let t = logit(w, b, row);
        let target = f64::from(label);
        loss += if label == 1 { softplus(-t) } else { softplus(t) };
        let r = sigmoid(t) - target;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
        gb += r;
    }
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    for (g, v) in gw.iter_mut().zip(w) {
        *g += l2 * v;
    }
    (loss, gw, gb)
}

/// Same as [`train_logistic`], also returning the loss before every epoch's update.
pub fn train_logistic_with_history(
    x: &FeatureMatrix,
    y: &[Label],
    cfg: &LogisticConfig,
) -> Result<(LogRegModel, Vec<f64>)> {
    if x.n_rows() != y.len() {
        return Err(Error::InvalidArgument("label count differs from row count".into()));
    }
    let counts = class_counts(y);
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass("logistic training data"));
    }
    if !(cfg.learning_rate > 0.0) || !(cfg.l2 >= 0.0) || cfg.epochs == 0 {
        return Err(Error::InvalidArgument("invalid logistic config".into()));
    }
    let d = x.n_cols();
    // parameter vector: weights then bias
    let mut params = alloc::vec![0.0; d + 1];
    let mut adam = Adam::new(d + 1, cfg.learning_rate, 0.9, 0.999, 1e-8);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut grad = alloc::vec![0.0; d + 1];
    for _ in 0..cfg.epochs {
        let (loss, gw, gb) = logistic_loss_and_grad(&params[..d], params[d], x, y, cfg.l2);
        history.push(loss);
        grad[..d].copy_from_slice(&gw);
        grad[d] = gb;
        adam.step(params.iter_mut(), &grad);
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("logistic parameters"));
    }
    let bias = params.pop().unwrap();
    Ok((
        LogRegModel {
            weights: params,
            bias,
            config: *cfg,
        },
        history,
    ))
}

/// Starts from `w = 0, b = 0`.
pub fn train_logistic(x: &FeatureMatrix, y: &[Label], cfg: &LogisticConfig) -> Result<LogRegModel> {
    train_logistic_with_history(x, y, cfg).map(|(m, _)| m)
}

pub fn logistic_predict_proba(m: &LogRegModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    x.ensure_width(m.weights.len())?;
    Ok(x.rows().map(|r| sigmoid(logit(&m.weights, m.bias, r))).collect())
}

impl Classifier for LogRegModel {
    fn input_width(&self) -> usize {
        self.weights.len()
    }

    fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        logistic_predict_proba(self, x)
    }
}
