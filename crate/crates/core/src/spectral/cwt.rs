//! Continuous wavelet transform with complex Gabor (Gaussian-modulated)
//! atoms.
//!
//! Scale `k` uses `psi_k[m] = g(m) exp(i 2 pi f_k m / fs)` with a Gaussian
//! envelope of std `sigma_k = cycles / (2 pi f_k)`, truncated at
//! `SUPPORT_SIGMAS` standard deviations and scaled to unit discrete L2 norm.
//! The output is `|sum_m x[t - m] psi_k[m]|` with zeros outside the series.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::WaveletBank;
use crate::error::{Error, Result};

/// Kernel half-width in envelope standard deviations.
pub const SUPPORT_SIGMAS: f64 = 4.0;
/// Cone-of-influence half-width in envelope standard deviations.
pub const VALIDITY_SIGMAS: f64 = 3.0;

/// Slack on `f_max <= fs / 2`, covering a 190 Hz bank on 384.6 Hz data.
const NYQUIST_SLACK: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CwtMethod {
    /// One forward FFT of the series, one multiply + inverse per scale.
    #[default]
    Fft,
    /// Time-domain convolution.
    Direct,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalogramOrigin {
    pub recording: String,
    pub segment: usize,
    /// Offset of column 0 in the source series, samples.
    pub window_start: usize,
}

/// Wavelet modulus, `n_scales x n_time`, row-major. Row 0 is the highest
/// frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    pub modulus: Vec<f64>,
    pub n_scales: usize,
    pub n_time: usize,
    pub center_freqs_hz: Vec<f64>,
    pub sample_interval_s: f64,
    /// Per-scale cone-of-influence half-width in samples. Columns closer than
    /// this to either edge of the original series are boundary-affected.
    pub coi_samples: Vec<usize>,
    pub origin: ScalogramOrigin,
}

impl Scalogram {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.modulus[k * self.n_time..(k + 1) * self.n_time]
    }

    pub fn get(&self, k: usize, t: usize) -> f64 {
        self.modulus[k * self.n_time + t]
    }

    pub fn sample_rate_hz(&self) -> f64 {
        1.0 / self.sample_interval_s
    }

    /// Whether column `t` is clear of boundary effects at scale `k`.
    ///
    /// `series_len` is the length of the transformed series and positions
    /// are measured in that series.
    pub fn is_valid(&self, k: usize, t: usize, series_len: usize) -> bool {
        let pos = t + self.origin.window_start;
        let h = self.coi_samples[k];
        pos >= h && pos + h < series_len
    }

    #[cfg(test)]
    pub(crate) fn empty_for_tests() -> Self {
        Self {
            modulus: vec![0.0; 4],
            n_scales: 2,
            n_time: 2,
            center_freqs_hz: vec![2.0, 1.0],
            sample_interval_s: 0.1,
            coi_samples: vec![0, 0],
            origin: ScalogramOrigin::default(),
        }
    }
}

/// Discrete Gabor atom at `freq_hz`, indices `-half..=half`.
pub fn gabor_kernel(freq_hz: f64, cycles: f64, fs: f64) -> Vec<Complex64> {
    let sigma = cycles / (2.0 * std::f64::consts::PI * freq_hz) * fs;
    let half = (SUPPORT_SIGMAS * sigma).ceil() as i64;
    let w = 2.0 * std::f64::consts::PI * freq_hz / fs;
    let mut k: Vec<Complex64> = (-half..=half)
        .map(|m| {
            let m = m as f64;
            Complex64::from_polar((-0.5 * (m / sigma).powi(2)).exp(), w * m)
        })
        .collect();
    let norm = k.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    k.iter_mut().for_each(|c| *c /= norm);
    k
}

pub fn cwt(series: &[f64], fs: f64, bank: &WaveletBank) -> Result<Scalogram> {
    cwt_with(series, fs, bank, CwtMethod::Fft)
}

pub fn cwt_with(series: &[f64], fs: f64, bank: &WaveletBank, method: CwtMethod) -> Result<Scalogram> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::invalid("fs", "must be positive and finite"));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cwt input"));
    }
    if bank.f_max_hz > fs / 2.0 * (1.0 + NYQUIST_SLACK) {
        return Err(Error::invalid(
            "f_max_hz",
            format!("{} Hz exceeds the Nyquist frequency {:.3} Hz of the input", bank.f_max_hz, fs / 2.0),
        ));
    }
    let kernels: Vec<Vec<Complex64>> = bank
        .center_freqs_hz
        .iter()
        .map(|&f| gabor_kernel(f, bank.cycles, fs))
        .collect();
    let longest = kernels.iter().map(Vec::len).max().unwrap_or(0);
    if series.len() < longest {
        return Err(Error::TooShort {
            what: "cwt (longest wavelet support)",
            required: longest,
            actual: series.len(),
        });
    }

    let n = series.len();
    let rows: Vec<Vec<f64>> = match method {
        CwtMethod::Direct => kernels.par_iter().map(|k| direct_row(series, k)).collect(),
        CwtMethod::Fft => {
            let size = (n + longest - 1).next_power_of_two();
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(size);
            let inverse = planner.plan_fft_inverse(size);
            let mut spectrum: Vec<Complex64> = series.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            spectrum.resize(size, Complex64::default());
            forward.process(&mut spectrum);
            kernels
                .par_iter()
                .map(|k| fft_row(&spectrum, k, n, &forward, &inverse))
                .collect()
        }
    };

    let coi_samples = (0..bank.len())
        .map(|k| (VALIDITY_SIGMAS * bank.sigma_s(k) * fs).ceil() as usize)
        .collect();
    Ok(Scalogram {
        modulus: rows.concat(),
        n_scales: bank.len(),
        n_time: n,
        center_freqs_hz: bank.center_freqs_hz.clone(),
        sample_interval_s: 1.0 / fs,
        coi_samples,
        origin: ScalogramOrigin::default(),
    })
}

fn direct_row(x: &[f64], kernel: &[Complex64]) -> Vec<f64> {
    let half = (kernel.len() / 2) as isize;
    let n = x.len() as isize;
    (0..n)
        .map(|t| {
            let mut acc = Complex64::default();
            for (j, &c) in kernel.iter().enumerate() {
                let src = t - (j as isize - half);
                if (0..n).contains(&src) {
                    acc += c * x[src as usize];
                }
            }
            acc.norm()
        })
        .collect()
}

fn fft_row(
    spectrum: &[Complex64],
    kernel: &[Complex64],
    n: usize,
    forward: &Arc<dyn Fft<f64>>,
    inverse: &Arc<dyn Fft<f64>>,
) -> Vec<f64> {
    let size = spectrum.len();
    let half = kernel.len() / 2;
    let mut buf = kernel.to_vec();
    buf.resize(size, Complex64::default());
    forward.process(&mut buf);
    for (b, s) in buf.iter_mut().zip(spectrum) {
        *b *= s;
    }
    inverse.process(&mut buf);
    let scale = 1.0 / size as f64;
    buf[half..half + n].iter().map(|c| c.norm() * scale).collect()
}
