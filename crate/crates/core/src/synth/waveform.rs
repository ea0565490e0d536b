//! Event waveform families.
//!
//! Both generators are pure functions of the time axis and their parameters
//! and return unit-RMS output. Amplitude scaling happens in the recording
//! generator.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng::mix64;

pub type WaveformParams = BTreeMap<String, f64>;

fn param(params: &WaveformParams, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

/// Uniform value in [-0.5, 0.5) from a `(variant, k)` hash.
fn jitter_unit(variant: u64, k: i64, lane: u64) -> f64 {
    let h = mix64(mix64(variant ^ lane.wrapping_mul(0xA24B_AED4_963E_E407)) ^ k as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

fn sample_rate(t: &[f64]) -> Option<f64> {
    if t.len() < 2 {
        return None;
    }
    let dt = t[1] - t[0];
    (dt > 0.0).then(|| 1.0 / dt)
}

fn check_finite(t: &[f64]) -> Result<()> {
    if t.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("time axis"))
    }
}

/// Scales `x` to unit RMS in place. An all-zero input stays zero.
pub fn normalize_rms(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JackhammerParams {
    /// Impacts per second.
    pub impact_rate_hz: f64,
    /// Exponential decay rate of each impact, 1/s.
    pub damping: f64,
    /// Ringing frequency of the impact response.
    pub ring_hz: f64,
    /// Timing jitter as a fraction of the impact period.
    pub jitter: f64,
    pub variant: u64,
}

impl Default for JackhammerParams {
    fn default() -> Self {
        Self {
            impact_rate_hz: 20.0,
            damping: 80.0,
            ring_hz: 90.0,
            jitter: 0.05,
            variant: 0,
        }
    }
}

impl JackhammerParams {
    pub fn from_map(params: &WaveformParams) -> Self {
        let d = Self::default();
        Self {
            impact_rate_hz: param(params, "impact_rate_hz", d.impact_rate_hz),
            damping: param(params, "damping", d.damping),
            ring_hz: param(params, "ring_hz", d.ring_hz),
            jitter: param(params, "jitter", d.jitter),
            variant: param(params, "variant", 0.0) as u64,
        }
    }
}

/// Quasi-periodic train of damped ringing impacts.
pub fn jackhammer_waveform(t: &[f64], p: &JackhammerParams) -> Result<Vec<f64>> {
    check_finite(t)?;
    for (name, v) in [
        ("impact_rate_hz", p.impact_rate_hz),
        ("damping", p.damping),
        ("ring_hz", p.ring_hz),
        ("jitter", p.jitter),
    ] {
        if !v.is_finite() {
            return Err(Error::invalid(name, "must be finite"));
        }
    }
    if let Some(fs) = sample_rate(t) {
        if p.impact_rate_hz >= fs / 2.0 {
            return Err(Error::invalid(
                "impact_rate_hz",
                format!("{} Hz is above the Nyquist frequency {:.3} Hz", p.impact_rate_hz, fs / 2.0),
            ));
        }
        if p.ring_hz >= fs / 2.0 {
            return Err(Error::invalid(
                "ring_hz",
                format!("{} Hz is above the Nyquist frequency {:.3} Hz", p.ring_hz, fs / 2.0),
            ));
        }
    }
    if !(10.0..=40.0).contains(&p.impact_rate_hz) {
        return Err(Error::invalid("impact_rate_hz", "must lie in [10, 40] Hz"));
    }
    if p.damping <= 0.0 {
        return Err(Error::invalid("damping", "must be positive"));
    }
    if !(0.0..0.5).contains(&p.jitter) {
        return Err(Error::invalid("jitter", "must lie in [0, 0.5)"));
    }
    if t.is_empty() {
        return Ok(Vec::new());
    }

    let period = 1.0 / p.impact_rate_hz;
    // impacts older than this have decayed below e^-12
    let memory = 12.0 / p.damping;
    let mut out = Vec::with_capacity(t.len());
    for &ti in t {
        let k_hi = (ti * p.impact_rate_hz).floor() as i64 + 1;
        let k_lo = ((ti - memory) * p.impact_rate_hz).floor() as i64 - 1;
        let mut acc = 0.0;
        for k in k_lo..=k_hi {
            let onset = k as f64 * period + p.jitter * period * jitter_unit(p.variant, k, 0);
            let tau = ti - onset;
            if tau < 0.0 || tau > memory {
                continue;
            }
            let strength = 1.0 - 0.3 * (jitter_unit(p.variant, k, 1) + 0.5);
            acc += strength * (-p.damping * tau).exp() * (2.0 * PI * p.ring_hz * tau).sin();
        }
        out.push(acc);
    }
    normalize_rms(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcavatorParams {
    /// Bursts per second.
    pub burst_rate_hz: f64,
    /// Fraction of each burst period that is active.
    pub duty: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub variant: u64,
}

impl Default for ExcavatorParams {
    fn default() -> Self {
        Self {
            burst_rate_hz: 0.6,
            duty: 0.7,
            f_lo: 5.0,
            f_hi: 40.0,
            variant: 0,
        }
    }
}

impl ExcavatorParams {
    pub fn from_map(params: &WaveformParams) -> Self {
        let d = Self::default();
        Self {
            burst_rate_hz: param(params, "burst_rate_hz", d.burst_rate_hz),
            duty: param(params, "duty", d.duty),
            f_lo: param(params, "f_lo", d.f_lo),
            f_hi: param(params, "f_hi", d.f_hi),
            variant: param(params, "variant", 0.0) as u64,
        }
    }
}

/// Intermittent Hann-shaped bursts whose instantaneous frequency sweeps
/// `f_lo -> f_hi -> f_lo` over each burst.
pub fn excavator_waveform(t: &[f64], p: &ExcavatorParams) -> Result<Vec<f64>> {
    check_finite(t)?;
    for (name, v) in [
        ("burst_rate_hz", p.burst_rate_hz),
        ("duty", p.duty),
        ("f_lo", p.f_lo),
        ("f_hi", p.f_hi),
    ] {
        if !v.is_finite() {
            return Err(Error::invalid(name, "must be finite"));
        }
    }
    if let Some(fs) = sample_rate(t) {
        if p.f_hi >= fs / 2.0 {
            return Err(Error::invalid(
                "f_hi",
                format!("{} Hz is at or above the Nyquist frequency {:.3} Hz", p.f_hi, fs / 2.0),
            ));
        }
    }
    if p.burst_rate_hz <= 0.0 {
        return Err(Error::invalid("burst_rate_hz", "must be positive"));
    }
    if !(p.duty > 0.0 && p.duty <= 1.0) {
        return Err(Error::invalid("duty", "must lie in (0, 1]"));
    }
    if !(p.f_lo > 0.0 && p.f_lo < p.f_hi) {
        return Err(Error::invalid("f_lo", "need 0 < f_lo < f_hi"));
    }
    if t.is_empty() {
        return Ok(Vec::new());
    }

    let period = 1.0 / p.burst_rate_hz;
    let active = p.duty * period;
    let span = p.f_hi - p.f_lo;
    let mut out = Vec::with_capacity(t.len());
    for &ti in t {
        let k = (ti / period).floor();
        let tau = ti - k * period;
        if tau >= active {
            out.push(0.0);
            continue;
        }
        let x = PI * tau / active;
        let envelope = x.sin().powi(2);
        let phase0 = 2.0 * PI * (jitter_unit(p.variant, k as i64, 2) + 0.5);
        // integral of f_lo + span * sin^2(pi tau / active)
        let cycles = p.f_lo * tau + span * (tau / 2.0 - active * (2.0 * x).sin() / (4.0 * PI));
        out.push(envelope * (2.0 * PI * cycles + phase0).sin());
    }
    normalize_rms(&mut out);
    Ok(out)
}
