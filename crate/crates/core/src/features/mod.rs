//! Feature extraction.
//!
//! Extractors implement [`FeatureExtractor`] and are created by name from an
//! [`ExtractorRegistry`], so the pipeline can swap the feature stage from
//! configuration alone. Built-ins:
//!
//! | name       | input            | output                                  |
//! |------------|------------------|-----------------------------------------|
//! | `raw1d`    | raw time window  | standardized samples                    |
//! | `flat2d`   | scalogram image  | row-major pixels                        |
//! | `convbank` | scalogram image  | max/mean pooled random convolutions     |
//! | `imported` | sample id        | rows of an externally computed CSV      |

mod convbank;
mod embeddings;
mod raw;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::EventLabel;
use crate::spectral::ScalogramImage;

pub use convbank::{feat_convbank, ConvBank, ConvBankConfig, ConvBankExtractor, Kernel};
pub use embeddings::{export_embeddings, import_embeddings, ImportedExtractor};
pub use raw::{feat_flat2d, feat_raw1d, Flat2dExtractor, Raw1dExtractor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    Raw1d,
    Flat2d,
    Convbank,
    Imported,
}

impl fmt::Display for ExtractorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExtractorKind::Raw1d => "raw1d",
            ExtractorKind::Flat2d => "flat2d",
            ExtractorKind::Convbank => "convbank",
            ExtractorKind::Imported => "imported",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub sample_id: String,
    pub label: EventLabel,
    pub values: Vec<f64>,
    pub extractor: ExtractorKind,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn checked(
        sample_id: &str,
        label: EventLabel,
        values: Vec<f64>,
        extractor: ExtractorKind,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("feature vector"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(Self {
            sample_id: sample_id.to_string(),
            label,
            values,
            extractor,
        })
    }
}

/// Everything an extractor may look at for one sample.
#[derive(Debug, Clone, Copy)]
pub struct FeatureInput<'a> {
    pub sample_id: &'a str,
    pub label: EventLabel,
    pub raw: &'a [f64],
    pub image: Option<&'a ScalogramImage>,
}

pub trait FeatureExtractor: Send + Sync {
    fn kind(&self) -> ExtractorKind;

    /// Whether [`FeatureInput::image`] must be present.
    fn needs_image(&self) -> bool;

    fn extract(&self, input: &FeatureInput<'_>) -> Result<Vec<f64>>;

    /// Settings recorded alongside results for provenance.
    fn describe(&self) -> serde_json::Value;
}

/// Runs `extractor` over every input, in parallel, preserving order.
pub fn extract_all(extractor: &dyn FeatureExtractor, inputs: &[FeatureInput<'_>]) -> Result<Vec<FeatureVector>> {
    inputs
        .par_iter()
        .map(|inp| {
            let values = extractor.extract(inp)?;
            FeatureVector::checked(inp.sample_id, inp.label, values, extractor.kind())
        })
        .collect()
}

/// Settings consumed by extractor factories.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtractorSettings {
    /// Expected raw window length; `None` accepts any length.
    pub window_len: Option<usize>,
    pub convbank: ConvBankConfig,
    pub embeddings: Option<PathBuf>,
}

pub type ExtractorFactory = fn(&ExtractorSettings) -> Result<Box<dyn FeatureExtractor>>;

/// Name -> factory table for feature extractors.
pub struct ExtractorRegistry {
    factories: BTreeMap<&'static str, ExtractorFactory>,
}

impl ExtractorRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("raw1d", |s| Ok(Box::new(Raw1dExtractor { window_len: s.window_len })));
        r.register("flat2d", |_| Ok(Box::new(Flat2dExtractor)));
        r.register("convbank", |s| Ok(Box::new(ConvBankExtractor::new(ConvBank::generate(&s.convbank)?))));
        r.register("imported", |s| {
            let path = s
                .embeddings
                .as_ref()
                .ok_or_else(|| Error::Config("the `imported` extractor needs an embeddings file".into()))?;
            Ok(Box::new(ImportedExtractor::load(path)?))
        });
        r
    }

    pub fn register(&mut self, name: &'static str, factory: ExtractorFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, name: &str, settings: &ExtractorSettings) -> Result<Box<dyn FeatureExtractor>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: "extractor",
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        factory(settings)
    }
}

impl Default for ExtractorRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
