use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-spaced Gabor wavelet bank anchored at `f_max_hz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletBank {
    pub f_max_hz: f64,
    pub octaves: u32,
    pub voices_per_octave: u32,
    /// Envelope width in periods of the center frequency.
    pub cycles: f64,
    /// `f_max * 2^(-k / voices)` for `k = 0 .. octaves * voices`.
    pub center_freqs_hz: Vec<f64>,
}

impl Default for WaveletBank {
    fn default() -> Self {
        build_bank(190.0, 5, 20, 6.0).expect("default bank parameters are valid")
    }
}

impl WaveletBank {
    pub fn len(&self) -> usize {
        self.center_freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center_freqs_hz.is_empty()
    }

    pub fn f_min_hz(&self) -> f64 {
        *self.center_freqs_hz.last().expect("bank is never empty")
    }

    /// Gaussian envelope standard deviation at scale `k`, seconds.
    pub fn sigma_s(&self, k: usize) -> f64 {
        self.cycles / (2.0 * std::f64::consts::PI * self.center_freqs_hz[k])
    }
}

pub fn build_bank(f_max_hz: f64, octaves: u32, voices_per_octave: u32, cycles: f64) -> Result<WaveletBank> {
    if !(f_max_hz.is_finite() && f_max_hz > 0.0) {
        return Err(Error::invalid("f_max_hz", "must be positive and finite"));
    }
    if octaves == 0 {
        return Err(Error::invalid("octaves", "must be positive"));
    }
    if voices_per_octave == 0 {
        return Err(Error::invalid("voices_per_octave", "must be positive"));
    }
    if !(cycles.is_finite() && cycles > 0.0) {
        return Err(Error::invalid("cycles", "must be positive and finite"));
    }
    let count = octaves * voices_per_octave;
    let v = voices_per_octave as f64;
    let center_freqs_hz = (0..count).map(|k| f_max_hz * (-(k as f64) / v).exp2()).collect();
    Ok(WaveletBank {
        f_max_hz,
        octaves,
        voices_per_octave,
        cycles,
        center_freqs_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let b = WaveletBank::default();
        assert_eq!(b.len(), 100);
        assert_eq!(b.center_freqs_hz[0], 190.0);
        assert!((b.center_freqs_hz[20] - 95.0).abs() < 1e-12);
        // 190 * 2^(-99/20)
        assert!((b.center_freqs_hz[99] - 6.146_885_485_308_178).abs() / 6.147 < 1e-9);
        assert!(b.center_freqs_hz.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(b.f_min_hz(), b.center_freqs_hz[99]);
    }

    #[test]
    fn rejects_non_positive_parameters() {
        assert!(build_bank(0.0, 5, 20, 6.0).is_err());
        assert!(build_bank(190.0, 0, 20, 6.0).is_err());
        assert!(build_bank(190.0, 5, 0, 6.0).is_err());
        assert!(build_bank(190.0, 5, 20, -1.0).is_err());
    }
}
