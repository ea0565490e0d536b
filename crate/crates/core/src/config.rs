//! Run configuration.
//!
//! One JSON document drives a whole run. Every section is optional and falls
//! back to the defaults below; unknown keys anywhere are rejected. The
//! `seed` fields inside `heads` and `convbank` are ignored: all component
//! seeds are derived from the top-level `seed`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ConvBankConfig, ExtractorRegistry, ExtractorSettings};
use crate::learn::{HeadRegistry, HeadSettings};
use crate::rng::{self, Domain};
use crate::sense::DetectionConfig;
use crate::spectral::{build_bank, WaveletBank};
use crate::synth::{EventPlan, FiberSpec, Range, SplitPlan, DEFAULT_DURATION_S};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub per_class: usize,
    pub train_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            per_class: 49,
            train_fraction: 0.8,
        }
    }
}

/// Excavator recordings from a site the training data never saw, generated
/// with shifted waveform parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnseenConfig {
    pub count: usize,
    /// Overrides applied on top of the excavator plan.
    pub waveform: std::collections::BTreeMap<String, Range>,
    pub peak_amplitude_rad: Range,
}

impl Default for UnseenConfig {
    fn default() -> Self {
        Self {
            count: 20,
            waveform: [
                ("burst_rate_hz", [0.3, 0.45]),
                ("f_lo", [3.0, 5.0]),
                ("f_hi", [28.0, 36.0]),
            ]
            .iter()
            .map(|(k, r)| (k.to_string(), *r))
            .collect(),
            peak_amplitude_rad: [0.2, 0.6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BankConfig {
    pub f_max_hz: f64,
    pub octaves: u32,
    pub voices_per_octave: u32,
    pub cycles: f64,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            f_max_hz: 190.0,
            octaves: 5,
            voices_per_octave: 20,
            cycles: 6.0,
        }
    }
}

impl BankConfig {
    pub fn build(&self) -> Result<WaveletBank> {
        build_bank(self.f_max_hz, self.octaves, self.voices_per_octave, self.cycles)
    }
}

/// Which samples the cross-validation runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvProtocol {
    /// All balanced samples.
    All,
    /// Only the training part of the train/test split.
    TrainSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub folds: usize,
    pub protocol: CvProtocol,
    pub sweep_sizes: Vec<usize>,
    pub confidence_gate: f64,
    pub latency_repeats: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            protocol: CvProtocol::All,
            sweep_sizes: vec![96, 128, 160, 192],
            confidence_gate: 0.6,
            latency_repeats: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub fiber: FiberSpec,
    pub duration_s: f64,
    pub events: EventPlan,
    pub dataset: DatasetConfig,
    pub unseen: UnseenConfig,
    pub bank: BankConfig,
    pub window_s: f64,
    pub detection: DetectionConfig,
    pub image_size: usize,
    pub extractor: String,
    pub head: String,
    pub convbank: ConvBankConfig,
    /// CSV of externally computed embeddings for the `imported` extractor.
    pub embeddings: Option<PathBuf>,
    pub heads: HeadSettings,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            output_dir: PathBuf::from("out"),
            fiber: FiberSpec::desk(200.0),
            duration_s: DEFAULT_DURATION_S,
            events: EventPlan::default(),
            dataset: DatasetConfig::default(),
            unseen: UnseenConfig::default(),
            bank: BankConfig::default(),
            window_s: 1.0,
            detection: DetectionConfig::default(),
            image_size: 96,
            extractor: "convbank".into(),
            head: "rf".into(),
            convbank: ConvBankConfig::default(),
            embeddings: None,
            heads: HeadSettings::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn config_err(e: Error) -> Error {
    if e.is_config() {
        e
    } else {
        Error::Config(e.to_string())
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that can be checked before doing any work. All
    /// failures are configuration errors.
    pub fn validate(&self) -> Result<()> {
        self.fiber.validate().map_err(config_err)?;
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::Config("duration_s must be positive".into()));
        }
        self.events.validate(&self.fiber, self.duration_s)?;
        self.detection.validate().map_err(config_err)?;
        let bank = self.bank.build().map_err(config_err)?;
        if bank.f_max_hz > self.fiber.sample_rate_hz() / 2.0 * 1.02 {
            return Err(Error::Config(format!(
                "bank f_max {} Hz is above the Nyquist frequency {:.3} Hz",
                bank.f_max_hz,
                self.fiber.sample_rate_hz() / 2.0
            )));
        }
        if !(self.window_s.is_finite() && self.window_s > 0.0 && self.window_s <= self.duration_s) {
            return Err(Error::Config("window_s must lie in (0, duration_s]".into()));
        }
        if self.image_size < 8 {
            return Err(Error::Config("image_size must be at least 8".into()));
        }
        if self.dataset.per_class == 0 || !(self.dataset.train_fraction > 0.0 && self.dataset.train_fraction < 1.0) {
            return Err(Error::Config("dataset: per_class must be positive and train_fraction in (0, 1)".into()));
        }
        if self.eval.folds < 2 || self.eval.folds > self.dataset.per_class {
            return Err(Error::Config(format!(
                "eval.folds must lie in [2, per_class = {}]",
                self.dataset.per_class
            )));
        }
        if self.eval.sweep_sizes.iter().any(|&s| s < 8) {
            return Err(Error::Config("eval.sweep_sizes entries must be at least 8".into()));
        }
        if !(self.eval.confidence_gate.is_finite() && self.eval.confidence_gate >= 0.0) {
            return Err(Error::Config("eval.confidence_gate must be >= 0".into()));
        }
        if self.eval.latency_repeats == 0 {
            return Err(Error::Config("eval.latency_repeats must be at least 1".into()));
        }
        if self.convbank.n_kernels == 0 {
            return Err(Error::Config("convbank.n_kernels must be positive".into()));
        }
        let extractors = ExtractorRegistry::builtin();
        if !extractors.names().contains(&self.extractor.as_str()) {
            return Err(Error::UnknownStrategy {
                kind: "extractor",
                name: self.extractor.clone(),
                available: extractors.names().join(", "),
            });
        }
        if self.extractor == "imported" && self.embeddings.is_none() {
            return Err(Error::Config("extractor `imported` needs `embeddings`".into()));
        }
        let heads = HeadRegistry::builtin();
        if !heads.names().contains(&self.head.as_str()) {
            return Err(Error::UnknownStrategy {
                kind: "classifier head",
                name: self.head.clone(),
                available: heads.names().join(", "),
            });
        }
        for name in heads.names() {
            heads.create(name, &self.heads).map_err(config_err)?;
        }
        for (k, r) in &self.unseen.waveform {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(Error::Config(format!("unseen.waveform.{k}: need lo <= hi")));
            }
        }
        Ok(())
    }

    pub fn split_plan(&self) -> SplitPlan {
        SplitPlan {
            per_class: self.dataset.per_class,
            train_fraction: self.dataset.train_fraction,
            seed: rng::derive_seed(self.seed, Domain::Split, 0),
        }
    }

    pub fn fold_seed(&self) -> u64 {
        rng::derive_seed(self.seed, Domain::Folds, 0)
    }

    pub fn extractor_settings(&self) -> ExtractorSettings {
        ExtractorSettings {
            window_len: None,
            convbank: ConvBankConfig {
                seed: rng::derive_seed(self.seed, Domain::ConvBank, 0),
                ..self.convbank
            },
            embeddings: self.embeddings.clone(),
        }
    }

    pub fn head_settings(&self) -> HeadSettings {
        let mut h = self.heads.clone();
        h.forest.seed = rng::derive_seed(self.seed, Domain::Bootstrap, 0);
        h.svm.seed = rng::derive_seed(self.seed, Domain::Shuffle, 0);
        h.softmax.seed = self.seed;
        h
    }

    /// The event plan for unseen-site excavator recordings.
    pub fn unseen_plan(&self) -> EventPlan {
        let mut plan = self.events.clone();
        plan.excavator.peak_amplitude_rad = self.unseen.peak_amplitude_rad;
        for (k, r) in &self.unseen.waveform {
            plan.excavator.waveform.insert(k.clone(), *r);
        }
        plan
    }
}
