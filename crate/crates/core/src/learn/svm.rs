//! One-vs-rest linear SVM trained by epoch-wise hinge-loss subgradient
//! descent.
//!
//! Step size follows `η_t = 1 / (λ (t + t0))` with `t0 = 1 / (λ η0)`, so the
//! first step is `η0`. Margins are mapped through a softmax only to expose
//! the same confidence interface as the other heads.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::linear::{dot, spread_softmax, Standardizer};
use super::{check_training, ClassifierHead, Scores, TrainedModel};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::label::EventLabel;
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub eta0: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 60,
            eta0: 0.1,
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("svm.lambda", "must be positive"));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::invalid("svm.eta0", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("svm.epochs", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub config: SvmConfig,
    pub classes: Vec<EventLabel>,
    pub standardizer: Standardizer,
    /// One row per entry of `classes`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl SvmModel {
    pub fn margins(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let z = self.standardizer.apply(x);
        Ok(self.weights.iter().zip(&self.bias).map(|(w, b)| dot(w, &z) + b).collect())
    }
}

impl TrainedModel for SvmModel {
    fn head(&self) -> &'static str {
        "svm"
    }

    fn dim(&self) -> usize {
        self.standardizer.mean.len()
    }

    fn scores(&self, x: &[f64]) -> Result<Scores> {
        Ok(spread_softmax(&self.classes, &self.margins(x)?))
    }

    fn to_any(&self) -> super::AnyModel {
        super::AnyModel::Svm(self.clone())
    }
}

#[derive(Debug, Clone)]
pub struct LinearSvm {
    pub config: SvmConfig,
}

impl LinearSvm {
    pub fn new(config: SvmConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn train(&self, x: &[&[f64]], y: &[EventLabel]) -> Result<SvmModel> {
        let (dim, classes) = check_training(x, y)?;
        let cfg = &self.config;
        let standardizer = Standardizer::fit(x);
        let z: Vec<Vec<f64>> = x.iter().map(|r| standardizer.apply(r)).collect();
        let orders: Vec<Vec<usize>> = (0..cfg.epochs)
            .map(|e| {
                let mut o: Vec<usize> = (0..z.len()).collect();
                o.shuffle(&mut rng::stream(cfg.seed, Domain::Shuffle, e as u64));
                o
            })
            .collect();
        let t0 = 1.0 / (cfg.lambda * cfg.eta0);

        let mut weights = Vec::with_capacity(classes.len());
        let mut bias = Vec::with_capacity(classes.len());
        for &c in &classes {
            let mut w = vec![0.0; dim];
            let mut b = 0.0;
            let mut t = 0.0;
            for order in &orders {
                for &i in order {
                    let eta = 1.0 / (cfg.lambda * (t + t0));
                    t += 1.0;
                    let target = if y[i] == c { 1.0 } else { -1.0 };
                    let margin = target * (dot(&w, &z[i]) + b);
                    let shrink = 1.0 - eta * cfg.lambda;
                    w.iter_mut().for_each(|v| *v *= shrink);
                    if margin < 1.0 {
                        for (v, xi) in w.iter_mut().zip(&z[i]) {
                            *v += eta * target * xi;
                        }
                        b += eta * target;
                    }
                }
            }
            if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
                return Err(Error::Diverged { epoch: cfg.epochs });
            }
            weights.push(w);
            bias.push(b);
        }
        Ok(SvmModel {
            config: cfg.clone(),
            classes,
            standardizer,
            weights,
            bias,
        })
    }
}

impl ClassifierHead for LinearSvm {
    fn name(&self) -> &'static str {
        "svm"
    }

    fn fit(&self, x: &[&[f64]], y: &[EventLabel]) -> Result<Box<dyn TrainedModel>> {
        Ok(Box::new(self.train(x, y)?))
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "head": "svm", "config": self.config })
    }
}

pub fn svm_train(train: &[FeatureVector], cfg: &SvmConfig) -> Result<SvmModel> {
    let (x, y) = super::as_training(train);
    LinearSvm::new(cfg.clone())?.train(&x, &y)
}
