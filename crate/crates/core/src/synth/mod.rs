//! Synthetic differential-phase recordings.
//!
//! A [`Recording`] holds one trace per gauge segment. Every segment carries
//! white plus 1/f noise from the zone it lies in; events add a waveform whose
//! strength decays exponentially with distance from the event position,
//! box-averaged over the gauge length.

mod dataset;
mod io;
mod plan;
pub mod waveform;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::EventLabel;
use crate::rng::{self, Domain};

pub use dataset::{assemble, build_dataset, DatasetManifest, DatasetSample, ManifestEntry, Split, SplitPlan};
pub use io::{read_recording, write_recording, RecordingHeader};
pub use plan::{ClassPlan, EventPlan, Range};
pub use waveform::{
    excavator_waveform, jackhammer_waveform, ExcavatorParams, JackhammerParams, WaveformParams,
};

pub const DEFAULT_SAMPLE_INTERVAL_S: f64 = 0.0026;
pub const DEFAULT_GAUGE_LEN_M: f64 = 4.1;
pub const DEFAULT_DURATION_S: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseProfile {
    pub id: String,
    /// Standard deviation of the white component, radians.
    pub white_std: f64,
    /// Standard deviation of the 1/f component, radians.
    pub pink_std: f64,
    #[serde(default)]
    pub description: String,
}

impl NoiseProfile {
    pub fn urban() -> Self {
        Self {
            id: "urban".into(),
            white_std: 0.03,
            pink_std: 0.02,
            description: "urban / residential, hard ground".into(),
        }
    }

    pub fn desert() -> Self {
        Self {
            id: "desert".into(),
            white_std: 0.015,
            pink_std: 0.01,
            description: "desert, sandy soil".into(),
        }
    }

    /// Combined standard deviation of both components.
    pub fn total_std(&self) -> f64 {
        self.white_std.hypot(self.pink_std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub start_m: f64,
    pub end_m: f64,
    pub noise_profile_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub length_m: f64,
    pub gauge_len_m: f64,
    pub sample_interval_s: f64,
    pub zones: Vec<Zone>,
    pub noise_profiles: Vec<NoiseProfile>,
}

impl Default for FiberSpec {
    fn default() -> Self {
        Self::desk(2000.0)
    }
}

impl FiberSpec {
    /// Fiber of `length_m` split evenly into an urban and a desert zone.
    pub fn desk(length_m: f64) -> Self {
        let mid = length_m / 2.0;
        Self {
            length_m,
            gauge_len_m: DEFAULT_GAUGE_LEN_M,
            sample_interval_s: DEFAULT_SAMPLE_INTERVAL_S,
            zones: vec![
                Zone {
                    start_m: 0.0,
                    end_m: mid,
                    noise_profile_id: "urban".into(),
                },
                Zone {
                    start_m: mid,
                    end_m: length_m,
                    noise_profile_id: "desert".into(),
                },
            ],
            noise_profiles: vec![NoiseProfile::urban(), NoiseProfile::desert()],
        }
    }

    /// The 57 km field link: residential and urban ground up to 20 km, then
    /// desert.
    pub fn field() -> Self {
        Self {
            length_m: 57_000.0,
            zones: vec![
                Zone {
                    start_m: 0.0,
                    end_m: 20_000.0,
                    noise_profile_id: "urban".into(),
                },
                Zone {
                    start_m: 20_000.0,
                    end_m: 57_000.0,
                    noise_profile_id: "desert".into(),
                },
            ],
            ..Self::desk(57_000.0)
        }
    }

    pub fn n_segments(&self) -> usize {
        (self.length_m / self.gauge_len_m).ceil().max(1.0) as usize
    }

    pub fn sample_rate_hz(&self) -> f64 {
        1.0 / self.sample_interval_s
    }

    pub fn n_samples(&self, duration_s: f64) -> usize {
        (duration_s / self.sample_interval_s).round() as usize
    }

    /// Center of a gauge segment.
    pub fn segment_center_m(&self, segment: usize) -> f64 {
        segment as f64 * self.gauge_len_m + self.gauge_len_m / 2.0
    }

    pub fn segment_of(&self, position_m: f64) -> usize {
        ((position_m / self.gauge_len_m).floor() as usize).min(self.n_segments() - 1)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("length_m", self.length_m),
            ("gauge_len_m", self.gauge_len_m),
            ("sample_interval_s", self.sample_interval_s),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
            if v <= 0.0 {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        for p in &self.noise_profiles {
            if !(p.white_std.is_finite() && p.pink_std.is_finite()) {
                return Err(Error::NonFinite("noise profile"));
            }
            if p.white_std < 0.0 || p.pink_std < 0.0 {
                return Err(Error::invalid("noise_profiles", format!("`{}` has a negative std", p.id)));
            }
        }
        if self.zones.is_empty() {
            return Err(Error::invalid("zones", "at least one zone is required"));
        }
        let mut zones: Vec<&Zone> = self.zones.iter().collect();
        zones.sort_by(|a, b| a.start_m.total_cmp(&b.start_m));
        let mut cursor = 0.0;
        for z in zones {
            if !(z.start_m.is_finite() && z.end_m.is_finite()) {
                return Err(Error::NonFinite("zone bounds"));
            }
            if z.end_m <= z.start_m {
                return Err(Error::invalid("zones", format!("zone [{}, {}] is empty", z.start_m, z.end_m)));
            }
            if (z.start_m - cursor).abs() > 1e-9 {
                return Err(Error::invalid(
                    "zones",
                    format!("zones must tile the fiber: gap or overlap at {} m", cursor.min(z.start_m)),
                ));
            }
            if self.profile(&z.noise_profile_id).is_none() {
                return Err(Error::invalid(
                    "zones",
                    format!("unknown noise profile `{}`", z.noise_profile_id),
                ));
            }
            cursor = z.end_m;
        }
        if (cursor - self.length_m).abs() > 1e-9 {
            return Err(Error::invalid(
                "zones",
                format!("zones end at {cursor} m but the fiber is {} m long", self.length_m),
            ));
        }
        Ok(())
    }

    pub fn profile(&self, id: &str) -> Option<&NoiseProfile> {
        self.noise_profiles.iter().find(|p| p.id == id)
    }

    /// Noise profile of the zone containing `position_m`.
    pub fn profile_at(&self, position_m: f64) -> Option<&NoiseProfile> {
        let zone = self
            .zones
            .iter()
            .find(|z| position_m >= z.start_m && position_m < z.end_m)
            .or_else(|| self.zones.iter().max_by(|a, b| a.end_m.total_cmp(&b.end_m)))?;
        self.profile(&zone.noise_profile_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub label: EventLabel,
    pub position_m: f64,
    pub start_s: f64,
    pub duration_s: f64,
    /// Peak value of the event waveform at zero distance, radians.
    pub peak_amplitude_rad: f64,
    pub spatial_decay_m: f64,
    #[serde(default)]
    pub waveform_params: WaveformParams,
}

impl EventSpec {
    pub fn new(label: EventLabel, position_m: f64, peak_amplitude_rad: f64) -> Self {
        Self {
            label,
            position_m,
            start_s: 5.0,
            duration_s: 5.0,
            peak_amplitude_rad,
            spatial_decay_m: 30.0,
            waveform_params: BTreeMap::new(),
        }
    }

    fn validate(&self, fiber: &FiberSpec, recording_s: f64) -> Result<()> {
        for (name, v) in [
            ("position_m", self.position_m),
            ("start_s", self.start_s),
            ("duration_s", self.duration_s),
            ("peak_amplitude_rad", self.peak_amplitude_rad),
            ("spatial_decay_m", self.spatial_decay_m),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if self.waveform_params.values().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("waveform_params"));
        }
        if self.position_m < 0.0 || self.position_m > fiber.length_m {
            return Err(Error::EventPosition {
                position_m: self.position_m,
                length_m: fiber.length_m,
            });
        }
        if self.duration_s <= 0.0 {
            return Err(Error::invalid("duration_s", "event duration must be positive"));
        }
        if self.start_s < 0.0 || self.start_s + self.duration_s > recording_s + 1e-9 {
            return Err(Error::invalid(
                "start_s",
                format!(
                    "event [{}, {}] s does not fit in the {recording_s} s recording",
                    self.start_s,
                    self.start_s + self.duration_s
                ),
            ));
        }
        if self.peak_amplitude_rad < 0.0 {
            return Err(Error::invalid("peak_amplitude_rad", "must be non-negative"));
        }
        if self.spatial_decay_m <= 0.0 {
            return Err(Error::invalid("spatial_decay_m", "must be positive"));
        }
        Ok(())
    }
}

/// Mean of `exp(-|x - position| / decay)` over the segment `[start, end]`.
pub fn gauge_coupling(start_m: f64, end_m: f64, position_m: f64, decay_m: f64) -> f64 {
    let len = end_m - start_m;
    let l = decay_m;
    if position_m <= start_m {
        let (near, far) = (start_m - position_m, end_m - position_m);
        l / len * ((-near / l).exp() - (-far / l).exp())
    } else if position_m >= end_m {
        let (near, far) = (position_m - end_m, position_m - start_m);
        l / len * ((-near / l).exp() - (-far / l).exp())
    } else {
        let (a, b) = (position_m - start_m, end_m - position_m);
        l / len * (2.0 - (-a / l).exp() - (-b / l).exp())
    }
}

/// Unit-peak event waveform over the event's active samples.
///
/// Returns the first sample index and the waveform samples.
pub fn event_waveform(event: &EventSpec, sample_interval_s: f64) -> Result<(usize, Vec<f64>)> {
    let first = (event.start_s / sample_interval_s).ceil() as usize;
    let end_t = event.start_s + event.duration_s;
    let t: Vec<f64> = (first..)
        .map(|i| i as f64 * sample_interval_s)
        .take_while(|&ti| ti < end_t)
        .map(|ti| ti - event.start_s)
        .collect();
    let mut w = match event.label {
        EventLabel::NoEvent => vec![0.0; t.len()],
        EventLabel::Jackhammer => {
            jackhammer_waveform(&t, &JackhammerParams::from_map(&event.waveform_params))?
        }
        EventLabel::Excavator => {
            excavator_waveform(&t, &ExcavatorParams::from_map(&event.waveform_params))?
        }
    };
    let peak = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        w.iter_mut().for_each(|v| *v /= peak);
    }
    Ok((first, w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: String,
    pub fiber: FiberSpec,
    pub duration_s: f64,
    pub n_samples: usize,
    /// Row-major `[segment][sample]`, radians.
    pub traces: Vec<f32>,
    pub events: Vec<EventSpec>,
    pub seed: u64,
}

impl Recording {
    pub fn n_segments(&self) -> usize {
        self.fiber.n_segments()
    }

    pub fn trace(&self, segment: usize) -> &[f32] {
        &self.traces[segment * self.n_samples..(segment + 1) * self.n_samples]
    }

    pub fn trace_f64(&self, segment: usize) -> Vec<f64> {
        self.trace(segment).iter().map(|&v| v as f64).collect()
    }

    /// Class of the recording: the label of its strongest event, or
    /// [`EventLabel::NoEvent`].
    pub fn label(&self) -> EventLabel {
        self.events
            .iter()
            .filter(|e| e.peak_amplitude_rad > 0.0 && e.label != EventLabel::NoEvent)
            .max_by(|a, b| a.peak_amplitude_rad.total_cmp(&b.peak_amplitude_rad))
            .map_or(EventLabel::NoEvent, |e| e.label)
    }
}

/// 1/f noise via Kellet's refined pink filter, scaled to unit std.
fn pink_noise(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let white: f64 = rng.sample(StandardNormal);
        b[0] = 0.99886 * b[0] + white * 0.0555179;
        b[1] = 0.99332 * b[1] + white * 0.0750759;
        b[2] = 0.96900 * b[2] + white * 0.1538520;
        b[3] = 0.86650 * b[3] + white * 0.3104856;
        b[4] = 0.55000 * b[4] + white * 0.5329522;
        b[5] = -0.7616 * b[5] - white * 0.0168980;
        out.push(b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + white * 0.5362);
        b[6] = white * 0.115926;
    }
    let mean = out.iter().sum::<f64>() / n.max(1) as f64;
    let std = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
    if std > 0.0 {
        out.iter_mut().for_each(|v| *v = (*v - mean) / std);
    }
    out
}

/// Noise for one segment, drawn from its own `(seed, segment)` stream.
fn segment_noise(profile: &NoiseProfile, seed: u64, segment: usize, n: usize) -> Vec<f64> {
    let mut rng = rng::stream(seed, Domain::Noise, segment as u64);
    let mut out: Vec<f64> = (0..n)
        .map(|_| profile.white_std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    if profile.pink_std > 0.0 {
        for (o, p) in out.iter_mut().zip(pink_noise(&mut rng, n)) {
            *o += profile.pink_std * p;
        }
    }
    out
}

/// Generates a recording of `duration_s` seconds.
pub fn synth_recording(
    fiber: &FiberSpec,
    duration_s: f64,
    events: &[EventSpec],
    seed: u64,
) -> Result<Recording> {
    fiber.validate()?;
    if !duration_s.is_finite() {
        return Err(Error::NonFinite("duration_s"));
    }
    if duration_s <= 0.0 {
        return Err(Error::invalid("duration_s", "must be positive"));
    }
    for e in events {
        e.validate(fiber, duration_s)?;
    }
    let n_seg = fiber.n_segments();
    let n = fiber.n_samples(duration_s);
    if n == 0 {
        return Err(Error::invalid("duration_s", "shorter than one sample interval"));
    }

    let waves = events
        .iter()
        .map(|e| event_waveform(e, fiber.sample_interval_s))
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<Vec<f32>> = (0..n_seg)
        .into_par_iter()
        .map(|s| {
            let start = s as f64 * fiber.gauge_len_m;
            let end = (start + fiber.gauge_len_m).min(fiber.length_m.max(start + 1e-9));
            let profile = fiber
                .profile_at(fiber.segment_center_m(s).min(fiber.length_m))
                .expect("validated zones");
            let mut row = segment_noise(profile, seed, s, n);
            for (e, (first, w)) in events.iter().zip(&waves) {
                let gain = e.peak_amplitude_rad * gauge_coupling(start, end, e.position_m, e.spatial_decay_m);
                if gain < 1e-13 {
                    continue;
                }
                for (r, v) in row.iter_mut().skip(*first).zip(w) {
                    *r += gain * v;
                }
            }
            row.into_iter().map(|v| v as f32).collect()
        })
        .collect();

    Ok(Recording {
        id: format!("rec-{seed}"),
        fiber: fiber.clone(),
        duration_s,
        n_samples: n,
        traces: rows.concat(),
        events: events.to_vec(),
        seed,
    })
}
