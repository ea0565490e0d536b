//! Randomized event plans for dataset generation.
//!
//! Each generated recording carries at most one event whose position,
//! timing, amplitude and waveform parameters are drawn uniformly from the
//! ranges below. Draws for recording `i` of class `c` come from their own
//! stream, so any subset can be regenerated independently.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{synth_recording, EventSpec, FiberSpec, Recording};
use crate::error::{Error, Result};
use crate::label::EventLabel;
use crate::rng::{self, Domain};

/// Closed interval `[lo, hi]`; `lo == hi` pins the value.
pub type Range = [f64; 2];

fn draw(rng: &mut impl Rng, r: Range) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

fn check_range(name: &str, r: Range) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] {
        return Err(Error::Config(format!("range `{name}` must be finite with lo <= hi, got {r:?}")));
    }
    Ok(())
}

/// Parameter ranges for one event class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassPlan {
    pub peak_amplitude_rad: Range,
    pub start_s: Range,
    pub duration_s: Range,
    /// Waveform parameter ranges by name; a random `variant` is always added.
    pub waveform: BTreeMap<String, Range>,
}

impl ClassPlan {
    fn validate(&self, what: &str) -> Result<()> {
        check_range(&format!("{what}.peak_amplitude_rad"), self.peak_amplitude_rad)?;
        check_range(&format!("{what}.start_s"), self.start_s)?;
        check_range(&format!("{what}.duration_s"), self.duration_s)?;
        if self.peak_amplitude_rad[0] < 0.0 || self.start_s[0] < 0.0 || self.duration_s[0] <= 0.0 {
            return Err(Error::Config(format!("{what}: amplitudes and start times must be >= 0, durations > 0")));
        }
        for (k, r) in &self.waveform {
            check_range(&format!("{what}.waveform.{k}"), *r)?;
        }
        Ok(())
    }

    fn ranges(pairs: &[(&str, Range)]) -> BTreeMap<String, Range> {
        pairs.iter().map(|(k, r)| (k.to_string(), *r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EventPlan {
    pub jackhammer: ClassPlan,
    pub excavator: ClassPlan,
    pub spatial_decay_m: f64,
    /// Events keep this distance from both fiber ends.
    pub end_margin_m: f64,
}

impl Default for EventPlan {
    fn default() -> Self {
        Self {
            jackhammer: ClassPlan {
                peak_amplitude_rad: [0.08, 0.35],
                start_s: [1.0, 7.0],
                duration_s: [4.0, 7.0],
                waveform: ClassPlan::ranges(&[
                    ("impact_rate_hz", [16.0, 26.0]),
                    ("damping", [60.0, 110.0]),
                    ("ring_hz", [70.0, 120.0]),
                    ("jitter", [0.03, 0.08]),
                ]),
            },
            excavator: ClassPlan {
                peak_amplitude_rad: [0.25, 0.7],
                start_s: [1.0, 5.0],
                duration_s: [6.0, 9.0],
                waveform: ClassPlan::ranges(&[
                    ("burst_rate_hz", [0.45, 0.8]),
                    ("duty", [0.6, 0.8]),
                    ("f_lo", [4.0, 7.0]),
                    ("f_hi", [32.0, 45.0]),
                ]),
            },
            spatial_decay_m: 30.0,
            end_margin_m: 20.0,
        }
    }
}

impl EventPlan {
    pub fn validate(&self, fiber: &FiberSpec, duration_s: f64) -> Result<()> {
        self.jackhammer.validate("jackhammer")?;
        self.excavator.validate("excavator")?;
        if !(self.spatial_decay_m > 0.0 && self.spatial_decay_m.is_finite()) {
            return Err(Error::Config("spatial_decay_m must be positive".into()));
        }
        if !(self.end_margin_m >= 0.0 && 2.0 * self.end_margin_m < fiber.length_m) {
            return Err(Error::Config("end_margin_m must be >= 0 and leave room on the fiber".into()));
        }
        for (what, p) in [("jackhammer", &self.jackhammer), ("excavator", &self.excavator)] {
            if p.start_s[1] + p.duration_s[1] > duration_s {
                return Err(Error::Config(format!(
                    "{what}: latest event end {} s exceeds the {duration_s} s recording",
                    p.start_s[1] + p.duration_s[1]
                )));
            }
        }
        Ok(())
    }

    pub fn class(&self, label: EventLabel) -> Option<&ClassPlan> {
        match label {
            EventLabel::NoEvent => None,
            EventLabel::Jackhammer => Some(&self.jackhammer),
            EventLabel::Excavator => Some(&self.excavator),
        }
    }

    /// The event of recording `index` for `label` (`None` for no-event).
    pub fn draw_event(&self, fiber: &FiberSpec, label: EventLabel, seed: u64, index: usize) -> Option<EventSpec> {
        let plan = self.class(label)?;
        let mut rng = rng::stream(seed, Domain::EventPlan, stream_index(label, index));
        let position = rng.random_range(self.end_margin_m..=fiber.length_m - self.end_margin_m);
        let mut waveform_params: BTreeMap<String, f64> =
            plan.waveform.iter().map(|(k, r)| (k.clone(), draw(&mut rng, *r))).collect();
        waveform_params.insert("variant".into(), rng.random_range(0..1u64 << 32) as f64);
        Some(EventSpec {
            label,
            position_m: position,
            start_s: draw(&mut rng, plan.start_s),
            duration_s: draw(&mut rng, plan.duration_s),
            peak_amplitude_rad: draw(&mut rng, plan.peak_amplitude_rad),
            spatial_decay_m: self.spatial_decay_m,
            waveform_params,
        })
    }

    /// Recording `index` of class `label`; its id is `<prefix><code>-<index>`.
    pub fn recording(
        &self,
        fiber: &FiberSpec,
        duration_s: f64,
        label: EventLabel,
        seed: u64,
        index: usize,
        prefix: &str,
    ) -> Result<Recording> {
        let events: Vec<EventSpec> = self.draw_event(fiber, label, seed, index).into_iter().collect();
        let noise_seed = rng::derive_seed(seed, Domain::Noise, stream_index(label, index));
        let mut rec = synth_recording(fiber, duration_s, &events, noise_seed)?;
        rec.id = format!("{prefix}{}-{index:03}", label.code());
        Ok(rec)
    }
}

fn stream_index(label: EventLabel, index: usize) -> u64 {
    ((label.index() as u64) << 40) | index as u64
}
