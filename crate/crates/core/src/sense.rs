//! Disturbance detection and localization from the temporal standard
//! deviation of each segment's differential phase.
//!
//! A segment is flagged when its largest rolling std exceeds a robust
//! baseline of its own rolling-std series: `median + k * 1.4826 * MAD`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::Recording;

/// Makes the MAD a consistent estimator of a Gaussian std.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    pub window_s: f64,
    pub threshold_k: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            window_s: 1.0,
            threshold_k: 5.0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_s.is_finite() && self.window_s > 0.0) {
            return Err(Error::invalid("window_s", "must be positive"));
        }
        if !(self.threshold_k.is_finite() && self.threshold_k > 0.0) {
            return Err(Error::invalid("threshold_k", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedSegment {
    pub segment_index: usize,
    pub position_m: f64,
    /// Start time of the window holding the peak std.
    pub onset_s: f64,
    pub peak_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub window_samples: usize,
    /// Largest rolling std of each segment.
    pub max_std: Vec<f64>,
    /// Threshold applied to each segment.
    pub thresholds: Vec<f64>,
    /// Sorted by segment index.
    pub flagged: Vec<FlaggedSegment>,
}

impl DetectionReport {
    /// Flagged segment with the largest peak std; ties go to the lower index.
    pub fn strongest(&self) -> Option<&FlaggedSegment> {
        self.flagged.iter().fold(None, |best: Option<&FlaggedSegment>, f| match best {
            Some(b) if b.peak_std >= f.peak_std => Some(b),
            _ => Some(f),
        })
    }

    /// Groups runs of adjacent flagged segments and returns the strongest
    /// segment of each run.
    pub fn localize(&self) -> Vec<&FlaggedSegment> {
        let mut out: Vec<&FlaggedSegment> = Vec::new();
        let mut prev: Option<usize> = None;
        for f in &self.flagged {
            match (prev, out.last_mut()) {
                (Some(p), Some(best)) if f.segment_index == p + 1 => {
                    if f.peak_std > best.peak_std {
                        *best = f;
                    }
                }
                _ => out.push(f),
            }
            prev = Some(f.segment_index);
        }
        out
    }

    /// CSV of `segment,position_m,max_std,threshold`.
    pub fn max_std_csv(&self, gauge_len_m: f64) -> String {
        let mut s = String::from("segment,position_m,max_std,threshold\n");
        for (i, (m, t)) in self.max_std.iter().zip(&self.thresholds).enumerate() {
            let pos = i as f64 * gauge_len_m + gauge_len_m / 2.0;
            s.push_str(&format!("{i},{pos},{m},{t}\n"));
        }
        s
    }
}

/// Population std of every `window`-sample run of `trace`.
pub fn rolling_std(trace: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 2 {
        return Err(Error::invalid("window_samples", "must be at least 2"));
    }
    if window > trace.len() {
        return Err(Error::TooShort {
            what: "rolling std window",
            required: window,
            actual: trace.len(),
        });
    }
    // centering first keeps the running sums small
    let mean = trace.iter().sum::<f64>() / trace.len() as f64;
    let x: Vec<f64> = trace.iter().map(|v| v - mean).collect();
    let w = window as f64;
    let mut sum: f64 = x[..window].iter().sum();
    let mut sq: f64 = x[..window].iter().map(|v| v * v).sum();
    let mut out = Vec::with_capacity(x.len() - window + 1);
    let std = |sum: f64, sq: f64| {
        let m = sum / w;
        (sq / w - m * m).max(0.0).sqrt()
    };
    out.push(std(sum, sq));
    for i in window..x.len() {
        let (add, drop) = (x[i], x[i - window]);
        sum += add - drop;
        sq += add * add - drop * drop;
        out.push(std(sum, sq));
    }
    Ok(out)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Median and median absolute deviation.
pub fn median_mad(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let med = median(&v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    (med, median(&dev))
}

struct SegmentStats {
    max_std: f64,
    argmax: usize,
    threshold: f64,
}

fn segment_stats(trace: &[f64], window: usize, k: f64) -> Result<SegmentStats> {
    let rs = rolling_std(trace, window)?;
    let (med, mad) = median_mad(&rs);
    let mut argmax = 0;
    for (i, &v) in rs.iter().enumerate() {
        if v > rs[argmax] {
            argmax = i;
        }
    }
    Ok(SegmentStats {
        max_std: rs[argmax],
        argmax,
        threshold: med + k * MAD_SCALE * mad,
    })
}

pub fn detect(rec: &Recording, cfg: &DetectionConfig) -> Result<DetectionReport> {
    cfg.validate()?;
    if rec.n_samples == 0 || rec.traces.is_empty() {
        return Err(Error::Empty("recording"));
    }
    if rec.n_samples < 2 {
        return Err(Error::TooShort {
            what: "detection (recording samples)",
            required: 2,
            actual: rec.n_samples,
        });
    }
    let fs = rec.fiber.sample_rate_hz();
    let window = ((cfg.window_s * fs).round() as usize).clamp(2, rec.n_samples);
    let stats = (0..rec.n_segments())
        .into_par_iter()
        .map(|s| segment_stats(&rec.trace_f64(s), window, cfg.threshold_k))
        .collect::<Result<Vec<_>>>()?;

    let gauge = rec.fiber.gauge_len_m;
    let flagged = stats
        .iter()
        .enumerate()
        .filter(|(_, st)| st.max_std > st.threshold)
        .map(|(i, st)| FlaggedSegment {
            segment_index: i,
            position_m: i as f64 * gauge + gauge / 2.0,
            onset_s: st.argmax as f64 / fs,
            peak_std: st.max_std,
        })
        .collect();
    Ok(DetectionReport {
        window_samples: window,
        max_std: stats.iter().map(|s| s.max_std).collect(),
        thresholds: stats.iter().map(|s| s.threshold).collect(),
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::EventLabel;
    use crate::synth::{synth_recording, EventSpec, FiberSpec};

    #[test]
    fn constant_trace_has_zero_std() {
        let r = rolling_std(&[2.5; 40], 7).unwrap();
        assert_eq!(r.len(), 34);
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_example() {
        assert_eq!(rolling_std(&[0.0, 0.0, 1.0, 1.0], 2).unwrap(), vec![0.0, 0.5, 0.0]);
    }

    #[test]
    fn full_window_is_full_trace_std() {
        let x = [1.0, 4.0, -2.0, 7.5, 0.25];
        let mean = x.iter().sum::<f64>() / 5.0;
        let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0).sqrt();
        let r = rolling_std(&x, 5).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - std).abs() < 1e-12);
    }

    #[test]
    fn window_errors() {
        assert!(rolling_std(&[1.0, 2.0], 3).is_err());
        assert!(rolling_std(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn matches_naive_rolling_std() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 37 % 101) as f64).sin() * 3.0 + 100.0).collect();
        let fast = rolling_std(&x, 25).unwrap();
        for (i, v) in fast.iter().enumerate() {
            let w = &x[i..i + 25];
            let m = w.iter().sum::<f64>() / 25.0;
            let s = (w.iter().map(|u| (u - m).powi(2)).sum::<f64>() / 25.0).sqrt();
            assert!((v - s).abs() < 1e-9);
        }
    }

    #[test]
    fn single_sample_recording_is_rejected() {
        let rec = synth_recording(&FiberSpec::desk(20.0), 0.0026, &[], 1).unwrap();
        assert_eq!(rec.n_samples, 1);
        assert!(detect(&rec, &DetectionConfig::default()).is_err());
    }

    #[test]
    fn event_is_localized() {
        let fiber = FiberSpec::desk(2000.0);
        let noise = fiber.profile("desert").unwrap().total_std();
        let ev = EventSpec::new(EventLabel::Excavator, 1490.0, 10.0 * noise);
        let rec = synth_recording(&fiber, 15.0, &[ev], 21).unwrap();
        let rep = detect(&rec, &DetectionConfig::default()).unwrap();
        let hit = rep.strongest().unwrap();
        let truth = (1490.0 / 4.1f64).floor() as usize;
        assert!(hit.segment_index.abs_diff(truth) <= 2);
        let groups = rep.localize();
        assert!(groups.iter().any(|g| g.segment_index.abs_diff(truth) <= 2));
        assert!(rep.flagged.windows(2).all(|w| w[0].segment_index < w[1].segment_index));
        for f in &rep.flagged {
            assert_eq!(f.position_m, f.segment_index as f64 * 4.1 + 2.05);
        }
    }

    #[test]
    fn zero_amplitude_event_equals_noise_only() {
        let fiber = FiberSpec::desk(300.0);
        let ev = EventSpec::new(EventLabel::Jackhammer, 100.0, 0.0);
        let a = detect(&synth_recording(&fiber, 15.0, &[ev], 4).unwrap(), &DetectionConfig::default()).unwrap();
        let b = detect(&synth_recording(&fiber, 15.0, &[], 4).unwrap(), &DetectionConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn larger_amplitude_never_lowers_peak_std() {
        let fiber = FiberSpec::desk(300.0);
        let seg = (150.0 / 4.1f64).floor() as usize;
        let mut last = 0.0;
        for amp in [0.2, 0.4, 0.8, 1.6] {
            let ev = EventSpec::new(EventLabel::Excavator, 150.0, amp);
            let rep = detect(&synth_recording(&fiber, 15.0, &[ev], 8).unwrap(), &DetectionConfig::default()).unwrap();
            assert!(rep.max_std[seg] >= last);
            last = rep.max_std[seg];
        }
    }

    #[test]
    fn delayed_event_shifts_onset() {
        let fiber = FiberSpec::desk(300.0);
        let seg = (150.0 / 4.1f64).floor() as usize;
        let onset = |start: f64| {
            let ev = EventSpec {
                start_s: start,
                duration_s: 3.0,
                ..EventSpec::new(EventLabel::Jackhammer, 150.0, 1.0)
            };
            let rep = detect(&synth_recording(&fiber, 15.0, &[ev], 2).unwrap(), &DetectionConfig::default()).unwrap();
            rep.flagged.iter().find(|f| f.segment_index == seg).unwrap().onset_s
        };
        let (a, b) = (onset(3.0), onset(7.5));
        assert!(((b - a) - 4.5).abs() <= 1.0, "onsets {a} {b}");
    }
}
