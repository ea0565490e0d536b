//! Cross-validation, metrics and report tables.

mod cv;
mod experiments;
mod tables;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{EventLabel, N_CLASSES};
use crate::rng::{self, Domain};

pub use cv::{run_cv, CvReport, MetricsReport, SamplePrediction};
pub use experiments::{
    compare_heads, compare_table, eval_unseen, featurize, latency_table, sweep_input_size, sweep_table, CompareRow,
    CompareSettings, SweepRow, SweepSettings, UnseenPrediction, UnseenReport,
};
pub use tables::{confusion_pgm, fmt_pct, render_row, Table};

/// Stratified assignment of sample indices to `k` test folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Sorted sample indices of each test fold.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn n_samples(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    /// Every index outside test fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        let mut in_test = vec![false; self.n_samples()];
        for &i in &self.folds[f] {
            in_test[i] = true;
        }
        (0..in_test.len()).filter(|&i| !in_test[i]).collect()
    }

    pub fn fold_ids<'a>(&self, ids: &'a [String]) -> Vec<Vec<&'a str>> {
        self.folds.iter().map(|f| f.iter().map(|&i| ids[i].as_str()).collect()).collect()
    }
}

/// Per class, indices are shuffled and dealt round-robin starting at fold 0,
/// so per-class fold counts differ by at most one.
pub fn stratified_kfold(labels: &[EventLabel], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid("k", "need at least 2 folds"));
    }
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let mut folds = vec![Vec::new(); k];
    for class in EventLabel::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(Error::InsufficientSamples {
                class,
                available: idx.len(),
                required: k,
            });
        }
        idx.shuffle(&mut rng::stream(seed, Domain::Folds, class.index() as u64));
        for (j, i) in idx.into_iter().enumerate() {
            folds[j % k].push(i);
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(FoldPlan { k, seed, folds })
}

/// Rows are truth, columns are predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N_CLASSES]; N_CLASSES],
}

pub type RateMatrix = [[f64; N_CLASSES]; N_CLASSES];

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Row-normalized rates; rows without samples stay zero.
    pub fn normalized(&self) -> RateMatrix {
        let mut out = [[0.0; N_CLASSES]; N_CLASSES];
        for (o, row) in out.iter_mut().zip(&self.counts) {
            let n: u64 = row.iter().sum();
            if n > 0 {
                for (v, &c) in o.iter_mut().zip(row) {
                    *v = c as f64 / n as f64;
                }
            }
        }
        out
    }

    pub fn add(&mut self, truth: EventLabel, predicted: EventLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }
}

pub fn confusion(truth: &[EventLabel], predicted: &[EventLabel]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::DimMismatch {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in truth.iter().zip(predicted) {
        cm.add(*t, *p);
    }
    Ok(cm)
}

/// Accuracy, macro F1 and error rate, all in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub macro_f1: f64,
    pub err: f64,
}

/// Per-class F1 as `2 tp / (2 tp + fp + fn)`; 0 when the class never occurs
/// in truth or predictions.
pub fn per_class_f1(cm: &ConfusionMatrix) -> [f64; N_CLASSES] {
    let mut out = [0.0; N_CLASSES];
    for (c, o) in out.iter_mut().enumerate() {
        let tp = cm.counts[c][c];
        let fp: u64 = (0..N_CLASSES).filter(|&r| r != c).map(|r| cm.counts[r][c]).sum();
        let fn_: u64 = (0..N_CLASSES).filter(|&p| p != c).map(|p| cm.counts[c][p]).sum();
        let den = 2 * tp + fp + fn_;
        if den > 0 {
            *o = 2.0 * tp as f64 / den as f64;
        }
    }
    out
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    let trace: u64 = (0..N_CLASSES).map(|c| cm.counts[c][c]).sum();
    let acc = 100.0 * trace as f64 / total as f64;
    let f1 = per_class_f1(cm);
    Ok(Metrics {
        acc,
        macro_f1: 100.0 * f1.iter().sum::<f64>() / N_CLASSES as f64,
        err: 100.0 - acc,
    })
}
