//! Pieces shared by the linear heads.

use serde::{Deserialize, Serialize};

use super::Scores;
use crate::label::EventLabel;

/// Per-feature affine map fitted on training data. Constant features get
/// scale 1 so they pass through centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[&[f64]]) -> Self {
        let dim = x[0].len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in x {
            for (m, v) in mean.iter_mut().zip(*row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(*row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Softmax of `logits` placed at the indices of `classes`; other labels get 0.
pub(crate) fn spread_softmax(classes: &[EventLabel], logits: &[f64]) -> Scores {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut out = [0.0; 3];
    for (c, e) in classes.iter().zip(exps) {
        out[c.index()] = e / total;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizer_centers_and_scales() {
        let data = [vec![1.0, 5.0], vec![3.0, 5.0]];
        let rows: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let s = Standardizer::fit(&rows);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[3.0, 5.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn spread_softmax_zero_fills_absent_classes() {
        let s = spread_softmax(&[EventLabel::NoEvent, EventLabel::Excavator], &[0.0, 0.0]);
        assert_eq!(s, [0.5, 0.0, 0.5]);
    }
}
