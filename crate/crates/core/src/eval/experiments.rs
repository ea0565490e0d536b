//! Input-size sweep, head comparison and unseen-site evaluation.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{fmt_pct, run_cv, stratified_kfold, FoldPlan, MetricsReport, Table};
use crate::error::{Error, Result};
use crate::features::{extract_all, ExtractorRegistry, ExtractorSettings, FeatureExtractor, FeatureInput, FeatureVector};
use crate::label::EventLabel;
use crate::learn::{as_training, measure_inference, HeadRegistry, HeadSettings, Scores, TrainedModel};
use crate::spectral::{rasterize, ScalogramImage};
use crate::synth::DatasetSample;

/// Features for every sample, rasterizing scalograms at `image_size` when
/// the extractor needs images.
pub fn featurize(samples: &[DatasetSample], extractor: &dyn FeatureExtractor, image_size: usize) -> Result<Vec<FeatureVector>> {
    let images: Vec<Option<ScalogramImage>> = if extractor.needs_image() {
        samples
            .par_iter()
            .map(|s| rasterize(&s.window.scalogram, image_size).map(Some))
            .collect::<Result<_>>()?
    } else {
        vec![None; samples.len()]
    };
    let inputs: Vec<FeatureInput> = samples
        .iter()
        .zip(&images)
        .map(|(s, img)| FeatureInput {
            sample_id: &s.id,
            label: s.label,
            raw: &s.window.raw,
            image: img.as_ref(),
        })
        .collect();
    extract_all(extractor, &inputs)
}

fn labels_of(samples: &[DatasetSample]) -> Vec<EventLabel> {
    samples.iter().map(|s| s.label).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub sizes: Vec<usize>,
    pub extractor: String,
    pub head: String,
    pub extractors: ExtractorSettings,
    pub heads: HeadSettings,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    pub metrics: MetricsReport,
    /// Everything needed to rerun this row.
    pub provenance: serde_json::Value,
}

/// Cross-validates one extractor/head pair at each image size, all sizes
/// sharing one fold plan.
pub fn sweep_input_size(samples: &[DatasetSample], s: &SweepSettings) -> Result<Vec<SweepRow>> {
    if s.sizes.is_empty() {
        return Err(Error::Empty("sweep sizes"));
    }
    let extractor = ExtractorRegistry::builtin().create(&s.extractor, &s.extractors)?;
    let head = HeadRegistry::builtin().create(&s.head, &s.heads)?;
    let plan = stratified_kfold(&labels_of(samples), s.k, s.seed)?;
    s.sizes
        .iter()
        .map(|&size| {
            let fv = featurize(samples, extractor.as_ref(), size)?;
            let report = run_cv(&fv, head.as_ref(), &plan)?;
            Ok(SweepRow {
                size,
                metrics: report.metrics,
                provenance: json!({
                    "image_size": size,
                    "extractor": extractor.describe(),
                    "head": head.describe(),
                    "folds": s.k,
                    "fold_seed": s.seed,
                    "n_samples": samples.len(),
                }),
            })
        })
        .collect()
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new("Performance under different input sizes", &["Input size", "Acc", "F1", "Er"]);
    for r in rows {
        let m = &r.metrics.mean;
        t.push(vec![
            format!("({},{})", r.size, r.size),
            fmt_pct(m.acc),
            fmt_pct(m.macro_f1),
            fmt_pct(m.err),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSettings {
    /// Image-feature extractor for the three full rows (`convbank` or
    /// `imported`).
    pub primary: String,
    pub image_size: usize,
    pub extractors: ExtractorSettings,
    pub heads: HeadSettings,
    pub k: usize,
    pub seed: u64,
    pub latency_repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: String,
    pub extractor: String,
    pub head: String,
    pub metrics: MetricsReport,
    /// Mean per-sample head latency, seconds. Machine dependent.
    pub latency_s: f64,
}

fn head_title(head: &str) -> &str {
    match head {
        "rf" => "RF",
        "svm" => "SVM",
        "softmax" => "SoftMax",
        other => other,
    }
}

fn extractor_title(name: &str) -> &str {
    match name {
        "raw1d" => "1D",
        "flat2d" => "2D",
        other => other,
    }
}

/// The seven-row classifier comparison, sorted by accuracy (descending,
/// stable).
pub fn compare_heads(samples: &[DatasetSample], s: &CompareSettings) -> Result<Vec<CompareRow>> {
    let plan = stratified_kfold(&labels_of(samples), s.k, s.seed)?;
    let layout: [(&str, &[&str]); 3] = [
        (s.primary.as_str(), &["rf", "svm", "softmax"]),
        ("flat2d", &["rf", "svm"]),
        ("raw1d", &["rf", "svm"]),
    ];
    let extractors = ExtractorRegistry::builtin();
    let features = layout
        .iter()
        .map(|(name, _)| {
            let ex = extractors.create(name, &s.extractors)?;
            featurize(samples, ex.as_ref(), s.image_size)
        })
        .collect::<Result<Vec<_>>>()?;

    let cells: Vec<(usize, &str, &str)> = layout
        .iter()
        .enumerate()
        .flat_map(|(i, (ex, heads))| heads.iter().map(move |h| (i, *ex, *h)))
        .collect();
    let mut rows = cells
        .par_iter()
        .map(|&(i, ex, h)| compare_cell(&features[i], ex, h, &plan, s))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.metrics.mean.acc.total_cmp(&a.metrics.mean.acc));
    Ok(rows)
}

fn compare_cell(fv: &[FeatureVector], extractor: &str, head: &str, plan: &FoldPlan, s: &CompareSettings) -> Result<CompareRow> {
    let head_impl = HeadRegistry::builtin().create(head, &s.heads)?;
    let report = run_cv(fv, head_impl.as_ref(), plan)?;
    let (x, y) = as_training(fv);
    let model = head_impl.fit(&x, &y)?;
    let latency_s = measure_inference(model.as_ref(), &x, s.latency_repeats.max(1))?;
    Ok(CompareRow {
        method: format!("{}-{}", extractor_title(extractor), head_title(head)),
        extractor: extractor.to_string(),
        head: head.to_string(),
        metrics: report.metrics,
        latency_s,
    })
}

pub fn compare_table(rows: &[CompareRow]) -> Table {
    let mut t = Table::new("Classifier comparison", &["Method", "Acc", "F1", "Er"]);
    for r in rows {
        let m = &r.metrics.mean;
        t.push(vec![r.method.clone(), fmt_pct(m.acc), fmt_pct(m.macro_f1), fmt_pct(m.err)]);
    }
    t
}

pub fn latency_table(rows: &[CompareRow]) -> Table {
    let mut t = Table::new("Mean per-sample inference time", &["Method", "ms"]);
    for r in rows {
        t.push(vec![r.method.clone(), format!("{:.4}", r.latency_s * 1e3)]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnseenPrediction {
    pub sample_id: String,
    pub truth: EventLabel,
    pub predicted: EventLabel,
    pub confidence: f64,
    pub scores: Scores,
    pub confident: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnseenReport {
    pub accuracy: f64,
    pub confidence_gate: f64,
    pub n_confident: usize,
    /// Accuracy over confident predictions only; `None` when there are none.
    pub confident_accuracy: Option<f64>,
    pub predictions: Vec<UnseenPrediction>,
}

/// Scores a held-out set after checking that none of its ids were used for
/// training.
pub fn eval_unseen(
    model: &dyn TrainedModel,
    unseen: &[FeatureVector],
    training_ids: &[String],
    confidence_gate: f64,
) -> Result<UnseenReport> {
    if unseen.is_empty() {
        return Err(Error::Empty("unseen set"));
    }
    let train: HashSet<&str> = training_ids.iter().map(String::as_str).collect();
    let overlap: Vec<&str> = unseen
        .iter()
        .map(|f| f.sample_id.as_str())
        .filter(|id| train.contains(id))
        .collect();
    if let Some(first) = overlap.first() {
        return Err(Error::Leakage {
            count: overlap.len(),
            first: first.to_string(),
        });
    }
    let predictions = unseen
        .iter()
        .map(|f| {
            let p = model.predict(&f.values)?;
            Ok(UnseenPrediction {
                sample_id: f.sample_id.clone(),
                truth: f.label,
                predicted: p.label,
                confidence: p.confidence,
                scores: p.scores,
                confident: p.is_confident(confidence_gate),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let correct = predictions.iter().filter(|p| p.predicted == p.truth).count();
    let confident: Vec<&UnseenPrediction> = predictions.iter().filter(|p| p.confident).collect();
    let confident_accuracy = (!confident.is_empty())
        .then(|| 100.0 * confident.iter().filter(|p| p.predicted == p.truth).count() as f64 / confident.len() as f64);
    Ok(UnseenReport {
        accuracy: 100.0 * correct as f64 / predictions.len() as f64,
        confidence_gate,
        n_confident: confident.len(),
        confident_accuracy,
        predictions,
    })
}
