//! Balanced labeled datasets with a stratified train/test split.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Recording;
use crate::error::{Error, Result};
use crate::label::EventLabel;
use crate::rng::{self, Domain};
use crate::spectral::{WindowedSample, Windower};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub label: EventLabel,
    pub source: String,
    pub segment: usize,
    pub window_center: usize,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPlan {
    pub per_class: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            per_class: 49,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn split_count(&self, split: Split) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("manifest entries serialize") + "\n")
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Parse {
                    path: path.into(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }
}

/// A windowed sample with its provenance.
#[derive(Debug, Clone)]
pub struct DatasetSample {
    pub id: String,
    pub label: EventLabel,
    pub source: String,
    pub window: WindowedSample,
}

/// Windows every recording, keeps `plan.per_class` samples of each class
/// (in input order) and assigns a stratified train/test split.
pub fn build_dataset(
    recordings: &[Recording],
    windower: &dyn Windower,
    plan: &SplitPlan,
) -> Result<(DatasetManifest, Vec<DatasetSample>)> {
    if recordings.is_empty() {
        return Err(Error::Empty("no recordings"));
    }
    let samples = recordings
        .par_iter()
        .map(|rec| {
            Ok(DatasetSample {
                id: rec.id.clone(),
                label: rec.label(),
                source: rec.id.clone(),
                window: windower.window(rec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(samples, plan)
}

/// Balances and splits already-windowed samples.
pub fn assemble(
    samples: Vec<DatasetSample>,
    plan: &SplitPlan,
) -> Result<(DatasetManifest, Vec<DatasetSample>)> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples"));
    }
    if !(plan.train_fraction > 0.0 && plan.train_fraction < 1.0) {
        return Err(Error::invalid("train_fraction", "must lie in (0, 1)"));
    }
    let mut by_class: [Vec<DatasetSample>; 3] = Default::default();
    for s in samples {
        by_class[s.label.index()].push(s);
    }
    for label in EventLabel::ALL {
        let available = by_class[label.index()].len();
        if available < plan.per_class {
            return Err(Error::InsufficientSamples {
                class: label,
                available,
                required: plan.per_class,
            });
        }
    }

    let mut entries = Vec::new();
    let mut kept = Vec::new();
    for label in EventLabel::ALL {
        let class = &mut by_class[label.index()];
        class.truncate(plan.per_class);
        let mut order: Vec<usize> = (0..class.len()).collect();
        order.shuffle(&mut rng::stream(plan.seed, Domain::Split, label.index() as u64));
        let n_train = (plan.train_fraction * class.len() as f64).round() as usize;
        let mut split = vec![Split::Test; class.len()];
        for &i in &order[..n_train] {
            split[i] = Split::Train;
        }
        for (s, sp) in class.drain(..).zip(split) {
            entries.push(ManifestEntry {
                id: s.id.clone(),
                label: s.label,
                source: s.source.clone(),
                segment: s.window.segment,
                window_center: s.window.center,
                split: sp,
            });
            kept.push(s);
        }
    }
    Ok((DatasetManifest { entries }, kept))
}
