//! Energy-peak windowing.

use super::{cwt, Scalogram, WaveletBank};
use crate::error::{Error, Result};
use crate::sense::{detect, DetectionConfig};
use crate::synth::Recording;

/// Column with the largest total energy `sum_k |W[k][t]|^2`; ties go to the
/// earliest column.
pub fn energy_peak(sg: &Scalogram) -> Result<usize> {
    if sg.n_time == 0 || sg.n_scales == 0 {
        return Err(Error::Empty("scalogram"));
    }
    let mut energy = vec![0.0; sg.n_time];
    for k in 0..sg.n_scales {
        for (e, v) in energy.iter_mut().zip(sg.row(k)) {
            *e += v * v;
        }
    }
    let mut best = 0;
    for (t, &e) in energy.iter().enumerate() {
        if e > energy[best] {
            best = t;
        }
    }
    Ok(best)
}

/// Slice of `round(width_s * fs)` columns centered on `center`. Near the
/// edges the slice is shifted inward so it always has the full width.
pub fn extract_window(sg: &Scalogram, center: usize, width_s: f64) -> Result<Scalogram> {
    let width = (width_s * sg.sample_rate_hz()).round() as usize;
    if width == 0 {
        return Err(Error::invalid("width_s", "window is shorter than one sample"));
    }
    if width > sg.n_time {
        return Err(Error::TooShort {
            what: "scalogram window",
            required: width,
            actual: sg.n_time,
        });
    }
    let start = window_start(center, width, sg.n_time);
    let mut modulus = Vec::with_capacity(width * sg.n_scales);
    for k in 0..sg.n_scales {
        modulus.extend_from_slice(&sg.row(k)[start..start + width]);
    }
    let mut origin = sg.origin.clone();
    origin.window_start += start;
    Ok(Scalogram {
        modulus,
        n_scales: sg.n_scales,
        n_time: width,
        center_freqs_hz: sg.center_freqs_hz.clone(),
        sample_interval_s: sg.sample_interval_s,
        coi_samples: sg.coi_samples.clone(),
        origin,
    })
}

fn window_start(center: usize, width: usize, n: usize) -> usize {
    center.saturating_sub(width / 2).min(n - width)
}

/// A windowed view of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub segment: usize,
    /// Energy-peak column in the full trace.
    pub center: usize,
    /// First sample of the window in the full trace.
    pub start: usize,
    /// Raw differential phase over the window.
    pub raw: Vec<f64>,
    pub scalogram: Scalogram,
}

/// Turns a recording into a single classification window.
pub trait Windower: Send + Sync {
    fn window(&self, rec: &Recording) -> Result<WindowedSample>;
}

/// Picks the most disturbed segment, transforms its trace and cuts a window
/// around the scalogram energy peak.
#[derive(Debug, Clone)]
pub struct EnergyPeakWindower {
    pub bank: WaveletBank,
    pub width_s: f64,
    pub detection: DetectionConfig,
}

impl Default for EnergyPeakWindower {
    fn default() -> Self {
        Self {
            bank: WaveletBank::default(),
            width_s: 1.0,
            detection: DetectionConfig::default(),
        }
    }
}

impl EnergyPeakWindower {
    /// Segment with the largest rolling std (lowest index on ties).
    ///
    /// Flags are not consulted: an event lasting more than half the
    /// recording lifts its segment's own baseline above the event level, so
    /// the loudest segment is the more reliable choice.
    pub fn select_segment(&self, rec: &Recording) -> Result<usize> {
        let report = detect(rec, &self.detection)?;
        let mut best = 0;
        for (i, &v) in report.max_std.iter().enumerate() {
            if v > report.max_std[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn window_segment(&self, rec: &Recording, segment: usize) -> Result<WindowedSample> {
        let trace = rec.trace_f64(segment);
        let mut sg = cwt(&trace, rec.fiber.sample_rate_hz(), &self.bank)?;
        sg.origin.recording = rec.id.clone();
        sg.origin.segment = segment;
        let center = energy_peak(&sg)?;
        let win = extract_window(&sg, center, self.width_s)?;
        let start = win.origin.window_start;
        Ok(WindowedSample {
            segment,
            center,
            start,
            raw: trace[start..start + win.n_time].to_vec(),
            scalogram: win,
        })
    }
}

impl Windower for EnergyPeakWindower {
    fn window(&self, rec: &Recording) -> Result<WindowedSample> {
        let segment = self.select_segment(rec)?;
        self.window_segment(rec, segment)
    }
}
