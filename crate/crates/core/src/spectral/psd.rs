//! Welch power spectral density.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-sided PSD, power per hertz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    pub density: Vec<f64>,
}

impl Spectrum {
    pub fn peak_bin(&self) -> usize {
        self.density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    }
}

/// Welch estimate with a periodic Hann window. `overlap` is in samples.
pub fn psd_welch(series: &[f64], fs: f64, segment_len: usize, overlap: usize) -> Result<Spectrum> {
    if segment_len < 8 {
        return Err(Error::invalid("segment_len", "must be at least 8"));
    }
    if segment_len > series.len() {
        return Err(Error::TooShort {
            what: "psd segment",
            required: segment_len,
            actual: series.len(),
        });
    }
    if overlap >= segment_len {
        return Err(Error::invalid("overlap", "must be smaller than segment_len"));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::invalid("fs", "must be positive and finite"));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("psd input"));
    }

    let window: Vec<f64> = (0..segment_len)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / segment_len as f64).cos())
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment_len);
    let bins = segment_len / 2 + 1;
    let step = segment_len - overlap;

    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::default(); segment_len];
    let mut segments = 0usize;
    let mut start = 0;
    while start + segment_len <= series.len() {
        for (b, (x, w)) in buf.iter_mut().zip(series[start..].iter().zip(&window)) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += step;
    }

    let scale = 1.0 / (fs * window_power * segments as f64);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || (segment_len % 2 == 0 && k == bins - 1) { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let freqs_hz = (0..bins).map(|k| k as f64 * fs / segment_len as f64).collect();
    Ok(Spectrum { freqs_hz, density })
}
