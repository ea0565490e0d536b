//! On-disk recording format: a JSON header plus a sidecar file of raw
//! little-endian `f32` samples, row-major `[segment][sample]`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EventSpec, FiberSpec, Recording};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingHeader {
    pub format_version: u32,
    pub id: String,
    pub fiber: FiberSpec,
    pub duration_s: f64,
    pub n_segments: usize,
    pub n_samples: usize,
    pub events: Vec<EventSpec>,
    pub seed: u64,
    /// Sidecar file name, relative to the header.
    pub traces_file: String,
}

fn sidecar_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("f32")
}

/// Writes `<path>` (JSON header) and `<path stem>.f32` (samples).
pub fn write_recording(rec: &Recording, path: &Path) -> Result<()> {
    let bin = sidecar_path(path);
    let header = RecordingHeader {
        format_version: FORMAT_VERSION,
        id: rec.id.clone(),
        fiber: rec.fiber.clone(),
        duration_s: rec.duration_s,
        n_segments: rec.n_segments(),
        n_samples: rec.n_samples,
        events: rec.events.clone(),
        seed: rec.seed,
        traces_file: bin
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let json = serde_json::to_string_pretty(&header).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::with_capacity(rec.traces.len() * 4);
    for v in &rec.traces {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))
}

pub fn read_recording(path: &Path) -> Result<Recording> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: RecordingHeader = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: format!("unsupported format version {}", header.format_version),
        });
    }
    header.fiber.validate()?;
    if header.n_segments != header.fiber.n_segments() {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: format!(
                "header declares {} segments, fiber geometry implies {}",
                header.n_segments,
                header.fiber.n_segments()
            ),
        });
    }
    let bin = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.traces_file);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let expected = header.n_segments * header.n_samples * 4;
    if bytes.len() != expected {
        return Err(Error::Parse {
            path: bin,
            line: 0,
            message: format!("expected {expected} bytes of samples, found {}", bytes.len()),
        });
    }
    let traces: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if traces.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("recording samples"));
    }
    Ok(Recording {
        id: header.id,
        fiber: header.fiber,
        duration_s: header.duration_s,
        n_samples: header.n_samples,
        traces,
        events: header.events,
        seed: header.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::EventLabel;
    use crate::synth::{synth_recording, EventSpec};

    #[test]
    fn write_then_read_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.json");
        let fiber = FiberSpec::desk(100.0);
        let rec = synth_recording(&fiber, 2.0, &[EventSpec {
            start_s: 0.5,
            duration_s: 1.0,
            ..EventSpec::new(EventLabel::Jackhammer, 50.0, 1.0)
        }], 4)
        .unwrap();
        write_recording(&rec, &path).unwrap();
        let back = read_recording(&path).unwrap();
        assert_eq!(back, rec);
        let raw = fs::read(dir.path().join("rec.f32")).unwrap();
        assert_eq!(raw.len(), rec.traces.len() * 4);
        assert_eq!(&raw[..4], &rec.traces[0].to_le_bytes());
    }

    #[test]
    fn truncated_sidecar_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.json");
        let rec = synth_recording(&FiberSpec::desk(50.0), 1.0, &[], 1).unwrap();
        write_recording(&rec, &path).unwrap();
        let bin = dir.path().join("rec.f32");
        let mut raw = fs::read(&bin).unwrap();
        raw.truncate(raw.len() - 4);
        fs::write(&bin, raw).unwrap();
        assert!(matches!(read_recording(&path), Err(Error::Parse { .. })));
    }
}
