//! Multinomial logistic regression by full-batch gradient descent.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::linear::{dot, spread_softmax, Standardizer};
use super::{check_training, ClassifierHead, Scores, TrainedModel};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::label::EventLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoftmaxConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Recorded for provenance; training starts from zero weights and uses
    /// no randomness.
    pub seed: u64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 300,
            l2: 1e-3,
            seed: 0,
        }
    }
}

impl SoftmaxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("softmax.learning_rate", "must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid("softmax.l2", "must be non-negative"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("softmax.epochs", "must be at least 1"));
        }
        Ok(())
    }
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²` (biases unpenalized) and its
/// gradient.
///
/// `params` holds `k` rows of `dim + 1` values, weights then bias; `y` holds
/// row indices in `0..k`.
pub fn softmax_loss_grad(params: &[f64], k: usize, x: &[Vec<f64>], y: &[usize], l2: f64) -> (f64, Vec<f64>) {
    let stride = params.len() / k;
    let dim = stride - 1;
    let n = x.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut logits = vec![0.0; k];
    for (row, &target) in x.iter().zip(y) {
        for (c, z) in logits.iter_mut().enumerate() {
            let p = &params[c * stride..(c + 1) * stride];
            *z = dot(&p[..dim], row) + p[dim];
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += lse - logits[target];
        for c in 0..k {
            let p = (logits[c] - lse).exp() - if c == target { 1.0 } else { 0.0 };
            let g = &mut grad[c * stride..(c + 1) * stride];
            for (gj, xj) in g[..dim].iter_mut().zip(row) {
                *gj += p * xj / n;
            }
            g[dim] += p / n;
        }
    }
    loss /= n;
    for c in 0..k {
        for j in 0..dim {
            let w = params[c * stride + j];
            loss += 0.5 * l2 * w * w;
            grad[c * stride + j] += l2 * w;
        }
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    pub config: SoftmaxConfig,
    pub classes: Vec<EventLabel>,
    pub standardizer: Standardizer,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub final_loss: f64,
}

impl TrainedModel for SoftmaxModel {
    fn head(&self) -> &'static str {
        "softmax"
    }

    fn dim(&self) -> usize {
        self.standardizer.mean.len()
    }

    fn scores(&self, x: &[f64]) -> Result<Scores> {
        self.check_dim(x)?;
        let z = self.standardizer.apply(x);
        let logits: Vec<f64> = self.weights.iter().zip(&self.bias).map(|(w, b)| dot(w, &z) + b).collect();
        Ok(spread_softmax(&self.classes, &logits))
    }

    fn to_any(&self) -> super::AnyModel {
        super::AnyModel::Softmax(self.clone())
    }
}

#[derive(Debug, Clone)]
pub struct LinearSoftmax {
    pub config: SoftmaxConfig,
}

impl LinearSoftmax {
    pub fn new(config: SoftmaxConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn train(&self, x: &[&[f64]], y: &[EventLabel]) -> Result<SoftmaxModel> {
        let (dim, classes) = check_training(x, y)?;
        let cfg = &self.config;
        let standardizer = Standardizer::fit(x);
        let z: Vec<Vec<f64>> = x.iter().map(|r| standardizer.apply(r)).collect();
        let targets: Vec<usize> = y
            .iter()
            .map(|l| classes.iter().position(|c| c == l).expect("present class"))
            .collect();
        let k = classes.len();
        let mut params = vec![0.0; k * (dim + 1)];
        let mut loss = f64::NAN;
        for epoch in 0..cfg.epochs {
            let (l, g) = softmax_loss_grad(&params, k, &z, &targets, cfg.l2);
            if !l.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss = l;
            params.iter_mut().zip(&g).for_each(|(p, gi)| *p -= cfg.learning_rate * gi);
        }
        let (final_loss, _) = softmax_loss_grad(&params, k, &z, &targets, cfg.l2);
        if !final_loss.is_finite() {
            return Err(Error::Diverged { epoch: cfg.epochs });
        }
        debug_assert!(loss.is_finite());
        let stride = dim + 1;
        Ok(SoftmaxModel {
            config: cfg.clone(),
            classes,
            standardizer,
            weights: (0..k).map(|c| params[c * stride..c * stride + dim].to_vec()).collect(),
            bias: (0..k).map(|c| params[c * stride + dim]).collect(),
            final_loss,
        })
    }
}

impl ClassifierHead for LinearSoftmax {
    fn name(&self) -> &'static str {
        "softmax"
    }

    fn fit(&self, x: &[&[f64]], y: &[EventLabel]) -> Result<Box<dyn TrainedModel>> {
        Ok(Box::new(self.train(x, y)?))
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "head": "softmax", "config": self.config })
    }
}

pub fn softmax_train(train: &[FeatureVector], cfg: &SoftmaxConfig) -> Result<SoftmaxModel> {
    let (x, y) = super::as_training(train);
    LinearSoftmax::new(cfg.clone())?.train(&x, &y)
}
