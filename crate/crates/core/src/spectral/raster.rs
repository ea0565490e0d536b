//! Scalogram rasterization to square images.

use serde::{Deserialize, Serialize};

use super::Scalogram;
use crate::error::{Error, Result};

/// `size x size` image with values in `[0, 1]`, row 0 = highest frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalogramImage {
    pub size: usize,
    pub pixels: Vec<f64>,
    /// Range mapped onto `[0, 1]`.
    pub norm_min: f64,
    pub norm_max: f64,
}

impl ScalogramImage {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.size + col]
    }

    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            pixels: vec![0.0; size * size],
            norm_min: 0.0,
            norm_max: 0.0,
        }
    }
}

/// Source coordinates for `out` samples spanning `len` inputs, corners
/// aligned. Returns `(lower index, fraction)` pairs.
fn taps(len: usize, out: usize) -> Vec<(usize, f64)> {
    (0..out)
        .map(|i| {
            if len == 1 || out == 1 {
                return (0, 0.0);
            }
            let pos = (i * (len - 1)) as f64 / (out - 1) as f64;
            let lo = (pos.floor() as usize).min(len - 2);
            (lo, pos - lo as f64)
        })
        .collect()
}

/// Bilinear resampling of a row-major `rows x cols` matrix, separable
/// (along columns, then along rows).
pub fn bilinear_resample(data: &[f64], rows: usize, cols: usize, out_rows: usize, out_cols: usize) -> Vec<f64> {
    assert_eq!(data.len(), rows * cols);
    let col_taps = taps(cols, out_cols);
    let mut tmp = Vec::with_capacity(rows * out_cols);
    for r in 0..rows {
        let row = &data[r * cols..(r + 1) * cols];
        for &(lo, f) in &col_taps {
            tmp.push(if cols == 1 { row[0] } else { row[lo] * (1.0 - f) + row[lo + 1] * f });
        }
    }
    let row_taps = taps(rows, out_rows);
    let mut out = Vec::with_capacity(out_rows * out_cols);
    for &(lo, f) in &row_taps {
        for c in 0..out_cols {
            out.push(if rows == 1 {
                tmp[c]
            } else {
                tmp[lo * out_cols + c] * (1.0 - f) + tmp[(lo + 1) * out_cols + c] * f
            });
        }
    }
    out
}

/// Bilinear resample to `size x size`, then min-max normalize. A constant
/// input maps to an all-zero image.
pub fn rasterize(sg: &Scalogram, size: usize) -> Result<ScalogramImage> {
    if size < 8 {
        return Err(Error::invalid("size", "image size must be at least 8"));
    }
    if sg.n_scales == 0 || sg.n_time == 0 {
        return Err(Error::Empty("scalogram"));
    }
    let mut pixels = bilinear_resample(&sg.modulus, sg.n_scales, sg.n_time, size, size);
    let (lo, hi) = pixels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi > lo {
        let span = hi - lo;
        pixels.iter_mut().for_each(|v| *v = ((*v - lo) / span).clamp(0.0, 1.0));
    } else {
        pixels.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(ScalogramImage {
        size,
        pixels,
        norm_min: lo,
        norm_max: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ScalogramOrigin;
    use proptest::prelude::*;

    fn sg(rows: usize, cols: usize, data: Vec<f64>) -> Scalogram {
        Scalogram {
            modulus: data,
            n_scales: rows,
            n_time: cols,
            center_freqs_hz: (0..rows).map(|k| 100.0 - k as f64).collect(),
            sample_interval_s: 0.0026,
            coi_samples: vec![0; rows],
            origin: ScalogramOrigin::default(),
        }
    }

    #[test]
    fn constant_input_gives_zero_image() {
        let img = rasterize(&sg(10, 20, vec![3.5; 200]), 16).unwrap();
        assert!(img.pixels.iter().all(|&v| v == 0.0));
        assert_eq!((img.norm_min, img.norm_max), (3.5, 3.5));
    }

    #[test]
    fn same_size_resample_is_identity() {
        let data: Vec<f64> = (0..96 * 96).map(|i| ((i * 7919) % 1000) as f64 / 7.0).collect();
        let out = bilinear_resample(&data, 96, 96, 96, 96);
        for (a, b) in data.iter().zip(&out) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    /// Reference resampler: per output pixel, weight the four neighbours
    /// directly.
    fn reference(data: &[f64], rows: usize, cols: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let y = i as f64 * (rows - 1) as f64 / (n - 1) as f64;
            let y0 = (y.floor() as usize).min(rows - 2);
            let fy = y - y0 as f64;
            for j in 0..n {
                let x = j as f64 * (cols - 1) as f64 / (n - 1) as f64;
                let x0 = (x.floor() as usize).min(cols - 2);
                let fx = x - x0 as f64;
                let at = |r: usize, c: usize| data[r * cols + c];
                out[i * n + j] = at(y0, x0) * (1.0 - fy) * (1.0 - fx)
                    + at(y0, x0 + 1) * (1.0 - fy) * fx
                    + at(y0 + 1, x0) * fy * (1.0 - fx)
                    + at(y0 + 1, x0 + 1) * fy * fx;
            }
        }
        out
    }

    #[test]
    fn argmax_lands_on_the_mapped_source_peak() {
        let (rows, cols) = (100, 385);
        let (pr, pc) = (37usize, 211usize);
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| {
                let (r, c) = ((i / cols) as f64, (i % cols) as f64);
                (-((r - pr as f64).powi(2) / 50.0 + (c - pc as f64).powi(2) / 800.0)).exp()
            })
            .collect();
        let img = rasterize(&sg(rows, cols, data.clone()), 96).unwrap();
        let arg = img.pixels.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let (ar, ac) = (arg / 96, arg % 96);
        let er = (pr as f64 * 95.0 / 99.0).round() as usize;
        let ec = (pc as f64 * 95.0 / 384.0).round() as usize;
        assert!(ar.abs_diff(er) <= 1 && ac.abs_diff(ec) <= 1, "({ar},{ac}) vs ({er},{ec})");

        let refimg = reference(&data, rows, cols, 96);
        let ours = bilinear_resample(&data, rows, cols, 96, 96);
        for (a, b) in ours.iter().zip(&refimg) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn size_and_empty_errors() {
        assert!(rasterize(&sg(4, 4, vec![1.0; 16]), 4).is_err());
        assert!(rasterize(&sg(0, 0, vec![]), 16).is_err());
    }

    proptest! {
        #[test]
        fn output_is_normalized_and_deterministic(
            data in prop::collection::vec(0.0f64..10.0, 12 * 30),
            size in 8usize..40,
        ) {
            let s = sg(12, 30, data);
            let a = rasterize(&s, size).unwrap();
            let b = rasterize(&s, size).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.pixels.len(), size * size);
            prop_assert!(a.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
