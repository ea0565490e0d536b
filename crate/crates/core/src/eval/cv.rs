use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{metrics, ConfusionMatrix, FoldPlan, Metrics, RateMatrix};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::label::{EventLabel, N_CLASSES};
use crate::learn::{ClassifierHead, Scores};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub sample_id: String,
    pub fold: usize,
    pub truth: EventLabel,
    pub predicted: EventLabel,
    pub confidence: f64,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub folds: Vec<Metrics>,
    pub mean: Metrics,
    /// Sample standard deviation over folds (zero for a single fold).
    pub std: Metrics,
    pub confusion: Vec<ConfusionMatrix>,
    /// Mean of the per-fold row-normalized matrices.
    pub avg_confusion: RateMatrix,
}

impl MetricsReport {
    pub fn from_folds(confusion: Vec<ConfusionMatrix>) -> Result<Self> {
        if confusion.is_empty() {
            return Err(Error::Empty("folds"));
        }
        let folds = confusion.iter().map(metrics).collect::<Result<Vec<_>>>()?;
        let n = folds.len() as f64;
        let mean_of = |f: fn(&Metrics) -> f64| folds.iter().map(f).sum::<f64>() / n;
        let std_of = |f: fn(&Metrics) -> f64, m: f64| {
            if folds.len() < 2 {
                0.0
            } else {
                (folds.iter().map(|x| (f(x) - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            }
        };
        let acc = mean_of(|m| m.acc);
        let f1 = mean_of(|m| m.macro_f1);
        let mean = Metrics {
            acc,
            macro_f1: f1,
            err: 100.0 - acc,
        };
        let acc_sd = std_of(|m| m.acc, acc);
        let std = Metrics {
            acc: acc_sd,
            macro_f1: std_of(|m| m.macro_f1, f1),
            err: acc_sd,
        };
        let mut avg = [[0.0; N_CLASSES]; N_CLASSES];
        for cm in &confusion {
            let r = cm.normalized();
            for (a, row) in avg.iter_mut().zip(r) {
                for (v, x) in a.iter_mut().zip(row) {
                    *v += x / n;
                }
            }
        }
        Ok(Self {
            folds,
            mean,
            std,
            confusion,
            avg_confusion: avg,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub head: String,
    pub metrics: MetricsReport,
    /// One entry per sample, in sample order.
    pub predictions: Vec<SamplePrediction>,
}

/// Trains on the complement of each test fold and scores the fold. Folds run
/// in parallel; results are gathered in fold order.
pub fn run_cv(features: &[FeatureVector], head: &dyn ClassifierHead, plan: &FoldPlan) -> Result<CvReport> {
    if plan.n_samples() != features.len() {
        return Err(Error::DimMismatch {
            expected: features.len(),
            actual: plan.n_samples(),
        });
    }
    let per_fold = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let train = plan.train_indices(f);
            let x: Vec<&[f64]> = train.iter().map(|&i| features[i].values.as_slice()).collect();
            let y: Vec<EventLabel> = train.iter().map(|&i| features[i].label).collect();
            let model = head.fit(&x, &y)?;
            let mut cm = ConfusionMatrix::default();
            let mut preds = Vec::with_capacity(plan.folds[f].len());
            for &i in &plan.folds[f] {
                let fv = &features[i];
                let p = model.predict(&fv.values)?;
                cm.add(fv.label, p.label);
                preds.push((
                    i,
                    SamplePrediction {
                        sample_id: fv.sample_id.clone(),
                        fold: f,
                        truth: fv.label,
                        predicted: p.label,
                        confidence: p.confidence,
                        scores: p.scores,
                    },
                ));
            }
            Ok((cm, preds))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cms = Vec::with_capacity(plan.k);
    let mut all = Vec::with_capacity(features.len());
    for (cm, preds) in per_fold {
        cms.push(cm);
        all.extend(preds);
    }
    all.sort_by_key(|(i, _)| *i);
    Ok(CvReport {
        head: head.name().to_string(),
        metrics: MetricsReport::from_folds(cms)?,
        predictions: all.into_iter().map(|(_, p)| p).collect(),
    })
}
