//! Fixed random convolutional features.
//!
//! A bank of frozen random kernels correlated with the image, rectified, then
//! reduced by global max and global mean pooling. Stands in for a frozen
//! pretrained convolutional stack.
//!
//! The rectification matters for the mean: a zero-mean kernel's plain
//! valid-mode mean is only a border term, nearly the same for every image.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ExtractorKind, FeatureExtractor, FeatureInput};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::spectral::ScalogramImage;

const KERNEL_SIDES: [usize; 4] = [3, 5, 7, 9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvBankConfig {
    pub n_kernels: usize,
    pub seed: u64,
}

impl Default for ConvBankConfig {
    fn default() -> Self {
        Self {
            n_kernels: 256,
            seed: 0,
        }
    }
}

/// Zero-mean, unit-norm kernel, row-major `height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub height: usize,
    pub width: usize,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBank {
    pub config: ConvBankConfig,
    pub kernels: Vec<Kernel>,
}

impl ConvBank {
    pub fn generate(config: &ConvBankConfig) -> Result<Self> {
        if config.n_kernels == 0 {
            return Err(Error::invalid("n_kernels", "must be positive"));
        }
        let kernels = (0..config.n_kernels)
            .map(|i| {
                let mut rng = rng::stream(config.seed, Domain::ConvBank, i as u64);
                let height = *KERNEL_SIDES.choose(&mut rng).expect("non-empty");
                let width = *KERNEL_SIDES.choose(&mut rng).expect("non-empty");
                let mut weights: Vec<f64> = (0..height * width).map(|_| rng.sample(StandardNormal)).collect();
                let mean = weights.iter().sum::<f64>() / weights.len() as f64;
                weights.iter_mut().for_each(|w| *w -= mean);
                let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
                if norm > 0.0 {
                    weights.iter_mut().for_each(|w| *w /= norm);
                }
                Kernel { height, width, weights }
            })
            .collect();
        Ok(Self {
            config: *config,
            kernels,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.kernels.len()
    }

    pub fn max_side(&self) -> usize {
        self.kernels.iter().map(|k| k.height.max(k.width)).max().unwrap_or(0)
    }
}

/// Valid-mode cross-correlation, ReLU, pooled to `(max, mean)`.
fn pooled(img: &ScalogramImage, k: &Kernel) -> (f64, f64) {
    let n = img.size;
    let (oh, ow) = (n - k.height + 1, n - k.width + 1);
    let mut out = vec![0.0; oh * ow];
    for i in 0..k.height {
        for j in 0..k.width {
            let w = k.weights[i * k.width + j];
            for r in 0..oh {
                let src = &img.pixels[(r + i) * n + j..(r + i) * n + j + ow];
                let dst = &mut out[r * ow..(r + 1) * ow];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    let (max, sum) = out.iter().fold((0.0f64, 0.0), |(mx, sum), &v| {
        let v = v.max(0.0);
        (mx.max(v), sum + v)
    });
    (max, sum / out.len() as f64)
}

/// `[max_0, mean_0, max_1, mean_1, ...]` over the bank's kernels.
pub fn feat_convbank(img: &ScalogramImage, bank: &ConvBank) -> Result<Vec<f64>> {
    if img.pixels.len() != img.size * img.size {
        return Err(Error::DimMismatch {
            expected: img.size * img.size,
            actual: img.pixels.len(),
        });
    }
    if img.size < bank.max_side() {
        return Err(Error::TooShort {
            what: "convbank image side",
            required: bank.max_side(),
            actual: img.size,
        });
    }
    Ok(bank
        .kernels
        .par_iter()
        .map(|k| pooled(img, k))
        .collect::<Vec<_>>()
        .into_iter()
        .flat_map(|(mx, mn)| [mx, mn])
        .collect())
}

#[derive(Debug, Clone)]
pub struct ConvBankExtractor {
    pub bank: ConvBank,
}

impl ConvBankExtractor {
    pub fn new(bank: ConvBank) -> Self {
        Self { bank }
    }
}

impl FeatureExtractor for ConvBankExtractor {
    fn kind(&self) -> ExtractorKind {
        ExtractorKind::Convbank
    }

    fn needs_image(&self) -> bool {
        true
    }

    fn extract(&self, input: &FeatureInput<'_>) -> Result<Vec<f64>> {
        let img = input.image.ok_or(Error::Empty("scalogram image"))?;
        feat_convbank(img, &self.bank)
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "extractor": "convbank",
            "n_kernels": self.bank.config.n_kernels,
            "seed": self.bank.config.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn image(size: usize, seed: u64) -> ScalogramImage {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut img = ScalogramImage::zeros(size);
        img.pixels.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
        img
    }

    /// Nested-loop oracle.
    fn oracle(img: &ScalogramImage, bank: &ConvBank) -> Vec<f64> {
        let n = img.size;
        let mut out = Vec::new();
        for k in &bank.kernels {
            let mut mx = 0.0f64;
            let mut sum = 0.0;
            let mut count = 0;
            for r in 0..=n - k.height {
                for c in 0..=n - k.width {
                    let mut acc = 0.0;
                    for i in 0..k.height {
                        for j in 0..k.width {
                            acc += img.get(r + i, c + j) * k.weights[i * k.width + j];
                        }
                    }
                    let relu = if acc > 0.0 { acc } else { 0.0 };
                    mx = mx.max(relu);
                    sum += relu;
                    count += 1;
                }
            }
            out.push(mx);
            out.push(sum / count as f64);
        }
        out
    }

    #[test]
    fn kernels_are_zero_mean_unit_norm_and_seeded() {
        let bank = ConvBank::generate(&ConvBankConfig::default()).unwrap();
        assert_eq!(bank.kernels.len(), 256);
        assert_eq!(bank.dim(), 512);
        for k in &bank.kernels {
            assert!(KERNEL_SIDES.contains(&k.height) && KERNEL_SIDES.contains(&k.width));
            assert!(k.weights.iter().sum::<f64>().abs() < 1e-12);
            assert!((k.weights.iter().map(|w| w * w).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(bank, ConvBank::generate(&ConvBankConfig::default()).unwrap());
        let other = ConvBank::generate(&ConvBankConfig { seed: 1, ..Default::default() }).unwrap();
        assert_ne!(bank, other);
    }

    #[test]
    fn zero_image_gives_zero_vector() {
        let bank = ConvBank::generate(&ConvBankConfig::default()).unwrap();
        let f = feat_convbank(&ScalogramImage::zeros(96), &bank).unwrap();
        assert_eq!(f.len(), 512);
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn small_image_is_rejected() {
        let bank = ConvBank::generate(&ConvBankConfig { n_kernels: 64, seed: 2 }).unwrap();
        assert_eq!(bank.max_side(), 9);
        assert!(matches!(
            feat_convbank(&ScalogramImage::zeros(8), &bank),
            Err(Error::TooShort { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn matches_nested_loop_oracle(img_seed in any::<u64>(), bank_seed in any::<u64>()) {
            let bank = ConvBank::generate(&ConvBankConfig { n_kernels: 16, seed: bank_seed }).unwrap();
            let img = image(16, img_seed);
            let fast = feat_convbank(&img, &bank).unwrap();
            let slow = oracle(&img, &bank);
            prop_assert!(fast.iter().all(|v| *v >= 0.0));
            let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() <= 1e-9 * scale);
            }
        }
    }
}
