//! Externally computed embeddings.
//!
//! CSV with header `sample_id,label,v0,v1,...`; labels are `C0`/`C1`/`C2`.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde_json::json;

use super::{ExtractorKind, FeatureExtractor, FeatureInput, FeatureVector};
use crate::error::{Error, Result};
use crate::label::EventLabel;

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        message: message.into(),
    }
}

/// Reads an embedding file. All rows must share one dimension.
pub fn import_embeddings(path: &Path) -> Result<Vec<FeatureVector>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if file.metadata().map(|m| m.len() == 0).unwrap_or(false) {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if headers.len() < 3 || &headers[0] != "sample_id" || &headers[1] != "label" {
        return Err(parse_err(path, 1, "header must be `sample_id,label,v0,v1,...`"));
    }
    for (i, h) in headers.iter().skip(2).enumerate() {
        if h != format!("v{i}") {
            return Err(parse_err(path, 1, format!("column {} should be `v{i}`, found `{h}`", i + 2)));
        }
    }
    let dim = headers.len() - 2;

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != dim + 2 {
            return Err(parse_err(path, line, format!("expected {dim} values, found {}", record.len().saturating_sub(2))));
        }
        let label: EventLabel = record[1].parse().map_err(|e: String| parse_err(path, line, e))?;
        let values = record
            .iter()
            .skip(2)
            .map(|s| {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("invalid number `{s}`")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_err(path, line, format!("non-finite value `{s}`")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(FeatureVector {
            sample_id: record[0].to_string(),
            label,
            values,
            extractor: ExtractorKind::Imported,
        });
    }
    Ok(out)
}

/// Writes vectors in the embedding schema. Values use shortest round-trip
/// formatting, so import after export is lossless.
pub fn export_embeddings(vectors: &[FeatureVector], path: &Path) -> Result<()> {
    let dim = vectors.first().map_or(0, FeatureVector::dim);
    if let Some(bad) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimMismatch {
            expected: dim,
            actual: bad.dim(),
        });
    }
    let mut s = String::from("sample_id,label");
    for i in 0..dim {
        s.push_str(&format!(",v{i}"));
    }
    s.push('\n');
    for v in vectors {
        s.push_str(&v.sample_id);
        s.push(',');
        s.push_str(v.label.code());
        for x in &v.values {
            s.push(',');
            s.push_str(&x.to_string());
        }
        s.push('\n');
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Looks samples up by id in a loaded embedding table.
#[derive(Debug, Clone)]
pub struct ImportedExtractor {
    source: String,
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl ImportedExtractor {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_vectors(path.display().to_string(), import_embeddings(path)?))
    }

    pub fn from_vectors(source: String, vectors: Vec<FeatureVector>) -> Self {
        let dim = vectors.first().map_or(0, FeatureVector::dim);
        Self {
            source,
            dim,
            table: vectors.into_iter().map(|v| (v.sample_id, v.values)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl FeatureExtractor for ImportedExtractor {
    fn kind(&self) -> ExtractorKind {
        ExtractorKind::Imported
    }

    fn needs_image(&self) -> bool {
        false
    }

    fn extract(&self, input: &FeatureInput<'_>) -> Result<Vec<f64>> {
        self.table
            .get(input.sample_id)
            .cloned()
            .ok_or_else(|| Error::Config(format!("no embedding for sample `{}` in {}", input.sample_id, self.source)))
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "extractor": "imported", "source": self.source, "dim": self.dim })
    }
}
