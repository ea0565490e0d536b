//! Classifier heads.
//!
//! A [`ClassifierHead`] is an untrained learner with fixed hyperparameters;
//! fitting it yields a [`TrainedModel`]. Heads are created by name through a
//! [`HeadRegistry`] (`rf`, `svm`, `softmax`).
//!
//! Every model only knows the classes present in its training data. Absent
//! classes always score 0.

mod forest;
mod linear;
mod softmax;
mod svm;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::label::{EventLabel, N_CLASSES};

pub use forest::{bootstrap_indices, rf_train, DecisionTree, ForestConfig, ForestModel, Node, RandomForest};
pub use linear::Standardizer;
pub use softmax::{softmax_loss_grad, softmax_train, LinearSoftmax, SoftmaxConfig, SoftmaxModel};
pub use svm::{svm_train, LinearSvm, SvmConfig, SvmModel};

pub type Scores = [f64; N_CLASSES];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: EventLabel,
    pub confidence: f64,
    pub scores: Scores,
    pub inference_time_s: f64,
}

impl Prediction {
    /// Label is the argmax score, ties going to the lowest class index.
    pub fn from_scores(scores: Scores, inference_time_s: f64) -> Self {
        let best = argmax(&scores);
        Self {
            label: EventLabel::from_index(best).expect("class index"),
            confidence: scores[best],
            scores,
            inference_time_s,
        }
    }

    /// Strict gate: `confidence > gate`.
    pub fn is_confident(&self, gate: f64) -> bool {
        self.confidence > gate
    }
}

/// First index of the maximum.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub trait TrainedModel: Send + Sync {
    fn head(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// Class scores; a distribution over the three labels.
    fn scores(&self, x: &[f64]) -> Result<Scores>;

    fn to_any(&self) -> AnyModel;

    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let t0 = Instant::now();
        let s = self.scores(x)?;
        Ok(Prediction::from_scores(s, t0.elapsed().as_secs_f64()))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(())
    }
}

pub trait ClassifierHead: Send + Sync {
    fn name(&self) -> &'static str;

    fn fit(&self, x: &[&[f64]], y: &[EventLabel]) -> Result<Box<dyn TrainedModel>>;

    /// Hyperparameters recorded alongside results.
    fn describe(&self) -> serde_json::Value;
}

/// Checks a training set and returns `(dim, classes present)`.
pub(crate) fn check_training(x: &[&[f64]], y: &[EventLabel]) -> Result<(usize, Vec<EventLabel>)> {
    if x.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if x.len() != y.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let dim = x[0].len();
    if dim == 0 {
        return Err(Error::Empty("feature vector"));
    }
    for row in x {
        if row.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training features"));
        }
    }
    let mut present: Vec<EventLabel> = y.to_vec();
    present.sort();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::SingleClass);
    }
    Ok((dim, present))
}

/// Splits feature vectors into the `(rows, labels)` form heads consume.
pub fn as_training(vectors: &[FeatureVector]) -> (Vec<&[f64]>, Vec<EventLabel>) {
    vectors.iter().map(|v| (v.values.as_slice(), v.label)).unzip()
}

/// Hyperparameters for every built-in head.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadSettings {
    pub forest: ForestConfig,
    pub svm: SvmConfig,
    pub softmax: SoftmaxConfig,
}

pub type HeadFactory = fn(&HeadSettings) -> Result<Box<dyn ClassifierHead>>;

/// Name -> factory table for classifier heads.
pub struct HeadRegistry {
    factories: BTreeMap<&'static str, HeadFactory>,
}

impl HeadRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("rf", |s| Ok(Box::new(RandomForest::new(s.forest.clone())?)));
        r.register("svm", |s| Ok(Box::new(LinearSvm::new(s.svm.clone())?)));
        r.register("softmax", |s| Ok(Box::new(LinearSoftmax::new(s.softmax.clone())?)));
        r
    }

    pub fn register(&mut self, name: &'static str, factory: HeadFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str, settings: &HeadSettings) -> Result<Box<dyn ClassifierHead>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: "classifier head",
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        factory(settings)
    }
}

impl Default for HeadRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnyModel {
    Rf(ForestModel),
    Svm(SvmModel),
    Softmax(SoftmaxModel),
}

impl AnyModel {
    pub fn into_model(self) -> Box<dyn TrainedModel> {
        match self {
            AnyModel::Rf(m) => Box::new(m),
            AnyModel::Svm(m) => Box::new(m),
            AnyModel::Softmax(m) => Box::new(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: AnyModel,
}

pub fn save_model(model: &dyn TrainedModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.to_any(),
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Box<dyn TrainedModel>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: format!("unsupported model format version {}", file.format_version),
        });
    }
    Ok(file.model.into_model())
}

/// Mean wall-clock seconds per sample, averaged over `repeats` passes.
pub fn measure_inference(model: &dyn TrainedModel, samples: &[&[f64]], repeats: usize) -> Result<f64> {
    if repeats == 0 {
        return Err(Error::invalid("repeats", "must be at least 1"));
    }
    if samples.is_empty() {
        return Err(Error::Empty("latency samples"));
    }
    let t0 = Instant::now();
    for _ in 0..repeats {
        for x in samples {
            std::hint::black_box(model.scores(std::hint::black_box(x))?);
        }
    }
    Ok(t0.elapsed().as_secs_f64() / (repeats * samples.len()) as f64)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn settings() -> HeadSettings {
        HeadSettings {
            forest: ForestConfig {
                n_trees: 15,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn registry_resolves_builtins() {
        let r = HeadRegistry::builtin();
        assert_eq!(r.names(), vec!["rf", "softmax", "svm"]);
        for name in r.names() {
            assert_eq!(r.create(name, &settings()).unwrap().name(), name);
        }
        assert!(matches!(
            r.create("knn", &settings()),
            Err(Error::UnknownStrategy { .. })
        ));
    }

    #[test]
    fn training_set_checks() {
        let x = [vec![1.0, 2.0], vec![3.0, 4.0]];
        let rows = rows(&x);
        assert!(matches!(
            check_training(&rows, &[EventLabel::NoEvent; 2]),
            Err(Error::SingleClass)
        ));
        assert!(matches!(check_training(&[], &[]), Err(Error::Empty(_))));
        let ragged = [vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            check_training(&super::fixtures::rows(&ragged), &[EventLabel::NoEvent, EventLabel::Excavator]),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn every_head_round_trips_through_json() {
        let (x, y) = blobs(10, 4, 1.0, 3);
        let dir = tempfile::tempdir().unwrap();
        let r = HeadRegistry::builtin();
        for name in r.names() {
            let model = r.create(name, &settings()).unwrap().fit(&rows(&x), &y).unwrap();
            let p = dir.path().join(format!("{name}.json"));
            save_model(model.as_ref(), &p).unwrap();
            let back = load_model(&p).unwrap();
            assert_eq!(back.to_any(), model.to_any(), "{name}");
            for row in &x {
                assert_eq!(back.scores(row).unwrap(), model.scores(row).unwrap());
            }
        }
    }

    #[test]
    fn corrupted_model_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(&p, r#"{"format_version":1,"model":{"kind":"rf","trees":"oops"}}"#).unwrap();
        assert!(matches!(load_model(&p), Err(Error::Json { .. })));
        fs::write(&p, r#"{"format_version":9,"model":{"kind":"svm"}}"#).unwrap();
        assert!(load_model(&p).is_err());
    }

    #[test]
    fn dim_mismatch_at_predict() {
        let (x, y) = blobs(5, 3, 1.0, 1);
        let r = HeadRegistry::builtin();
        for name in r.names() {
            let model = r.create(name, &settings()).unwrap().fit(&rows(&x), &y).unwrap();
            match model.predict(&[0.0; 5]) {
                Err(Error::DimMismatch { expected: 3, actual: 5 }) => {}
                other => panic!("{name}: {other:?}"),
            }
        }
    }

    #[test]
    fn inference_timing() {
        let (x, y) = blobs(5, 3, 1.0, 1);
        let model = RandomForest::new(settings().forest).unwrap().fit(&rows(&x), &y).unwrap();
        assert!(measure_inference(model.as_ref(), &rows(&x), 0).is_err());
        assert!(measure_inference(model.as_ref(), &[], 1).is_err());
        assert!(measure_inference(model.as_ref(), &rows(&x), 3).unwrap() > 0.0);
        assert!(model.predict(&x[0]).unwrap().inference_time_s >= 0.0);
    }

    #[test]
    fn strict_gate() {
        let p = Prediction::from_scores([0.4, 0.0, 0.6], 0.0);
        assert_eq!(p.label, EventLabel::Excavator);
        assert_eq!(p.confidence, 0.6);
        assert!(!p.is_confident(0.6));
        assert!(p.is_confident(0.59));
        let tie = Prediction::from_scores([0.5, 0.5, 0.0], 0.0);
        assert_eq!(tie.label, EventLabel::NoEvent);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn scores_are_distributions(seed in any::<u64>(), dim in 1usize..6) {
            let (x, y) = blobs(6, dim, 2.0, seed);
            let probes = random_rows(20, dim, seed ^ 1);
            let r = HeadRegistry::builtin();
            for name in r.names() {
                let model = r.create(name, &settings()).unwrap().fit(&rows(&x), &y).unwrap();
                for p in &probes {
                    let pr = model.predict(p).unwrap();
                    let sum: f64 = pr.scores.iter().sum();
                    prop_assert!((sum - 1.0).abs() <= 1e-9);
                    prop_assert!(pr.scores.iter().all(|s| (0.0..=1.0).contains(s)));
                    prop_assert_eq!(pr.confidence, pr.scores[pr.label.index()]);
                }
            }
        }
    }
}
