use serde_json::json;

use super::{ExtractorKind, FeatureExtractor, FeatureInput};
use crate::error::{Error, Result};
use crate::spectral::ScalogramImage;

/// Zero-mean, unit-variance copy of `window`. A constant window maps to
/// zeros.
pub fn feat_raw1d(window: &[f64], expected_len: Option<usize>) -> Result<Vec<f64>> {
    if let Some(len) = expected_len {
        if window.len() != len {
            return Err(Error::DimMismatch {
                expected: len,
                actual: window.len(),
            });
        }
    }
    if window.is_empty() {
        return Err(Error::Empty("raw window"));
    }
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let std = (window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std == 0.0 || !std.is_normal() {
        return Ok(vec![0.0; window.len()]);
    }
    Ok(window.iter().map(|v| (v - mean) / std).collect())
}

/// Row-major pixels.
pub fn feat_flat2d(img: &ScalogramImage) -> Vec<f64> {
    img.pixels.clone()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Raw1dExtractor {
    pub window_len: Option<usize>,
}

impl FeatureExtractor for Raw1dExtractor {
    fn kind(&self) -> ExtractorKind {
        ExtractorKind::Raw1d
    }

    fn needs_image(&self) -> bool {
        false
    }

    fn extract(&self, input: &FeatureInput<'_>) -> Result<Vec<f64>> {
        feat_raw1d(input.raw, self.window_len)
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "extractor": "raw1d", "window_len": self.window_len })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Flat2dExtractor;

impl FeatureExtractor for Flat2dExtractor {
    fn kind(&self) -> ExtractorKind {
        ExtractorKind::Flat2d
    }

    fn needs_image(&self) -> bool {
        true
    }

    fn extract(&self, input: &FeatureInput<'_>) -> Result<Vec<f64>> {
        input.image.map(feat_flat2d).ok_or(Error::Empty("scalogram image"))
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "extractor": "flat2d" })
    }
}
