//! Random forest of Gini trees.
//!
//! Split search compares the criterion `Σ c_L² / n_L + Σ c_R² / n_R` as an
//! exact rational, so tie-breaking (lowest feature, then lowest threshold) is
//! independent of floating-point rounding.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{argmax, check_training, ClassifierHead, Scores, TrainedModel};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::label::{EventLabel, N_CLASSES};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means `round(sqrt(dim))`.
    pub mtry: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            mtry: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees", "must be at least 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf", "must be at least 1"));
        }
        if self.mtry == Some(0) {
            return Err(Error::invalid("mtry", "must be at least 1"));
        }
        Ok(())
    }

    pub fn mtry_for(&self, dim: usize) -> usize {
        self.mtry.unwrap_or_else(|| (dim as f64).sqrt().round() as usize).clamp(1, dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf {
        counts: [u32; N_CLASSES],
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Gini decrease at this node.
        gain: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Tree growth limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub mtry: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
}

struct Grower<'a, R> {
    x: &'a [&'a [f64]],
    y: &'a [EventLabel],
    params: TreeParams,
    rng: &'a mut R,
}

fn class_counts(y: &[EventLabel], idx: &[usize]) -> [u64; N_CLASSES] {
    let mut c = [0u64; N_CLASSES];
    for &i in idx {
        c[y[i].index()] += 1;
    }
    c
}

fn sum_sq(c: &[u64; N_CLASSES]) -> u64 {
    c.iter().map(|v| v * v).sum()
}

/// Midpoint strictly usable as `a <= t < b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a / 2.0 + b / 2.0;
    if m >= a && m < b {
        m
    } else {
        a
    }
}

/// Best `(feature, threshold, gain)` over `features`, or `None` when no split
/// strictly lowers impurity.
fn best_split(
    x: &[&[f64]],
    y: &[EventLabel],
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64, f64)> {
    let n = idx.len() as u64;
    let total = class_counts(y, idx);
    let parent = sum_sq(&total);
    // criterion as num/den; start from the parent's value so only strict
    // improvements are accepted
    let (mut best_num, mut best_den) = (parent as u128, n as u128);
    let mut best = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left = [0u64; N_CLASSES];
        for p in 0..order.len() - 1 {
            left[y[order[p]].index()] += 1;
            let (a, b) = (x[order[p]][f], x[order[p + 1]][f]);
            if a == b {
                continue;
            }
            let nl = p as u64 + 1;
            let nr = n - nl;
            if nl < min_leaf as u64 || nr < min_leaf as u64 {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1], total[2] - left[2]];
            let num = (sum_sq(&left) * nr + sum_sq(&right) * nl) as u128;
            let den = (nl * nr) as u128;
            if num * best_den > best_num * den {
                best_num = num;
                best_den = den;
                best = Some((f, midpoint(a, b)));
            }
        }
    }
    best.map(|(f, t)| {
        let score = best_num as f64 / best_den as f64;
        let gain = (score - parent as f64 / n as f64) / n as f64;
        (f, t, gain)
    })
}

impl<R: Rng> Grower<'_, R> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let c = class_counts(self.y, idx);
        Node::Leaf {
            counts: [c[0] as u32, c[1] as u32, c[2] as u32],
        }
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> Node {
        let counts = class_counts(self.y, idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let at_depth = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || at_depth || idx.len() < 2 * self.params.min_samples_leaf {
            return self.leaf(idx);
        }
        let dim = self.x[0].len();
        let features: Vec<usize> = if self.params.mtry >= dim {
            (0..dim).collect()
        } else {
            let mut f = rand::seq::index::sample(self.rng, dim, self.params.mtry).into_vec();
            f.sort_unstable();
            f
        };
        let Some((feature, threshold, gain)) = best_split(self.x, self.y, idx, &features, self.params.min_samples_leaf)
        else {
            return self.leaf(idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = Box::new(self.grow(&l, depth + 1));
        let right = Box::new(self.grow(&r, depth + 1));
        Node::Split {
            feature,
            threshold,
            gain,
            left,
            right,
        }
    }
}

impl DecisionTree {
    /// Grows a tree on the rows listed in `sample` (repeats allowed). `rng`
    /// drives per-node feature sampling, consumed in pre-order.
    pub fn fit<R: Rng>(x: &[&[f64]], y: &[EventLabel], sample: &[usize], params: TreeParams, rng: &mut R) -> Self {
        let mut g = Grower { x, y, params, rng };
        Self {
            root: g.grow(sample, 0),
        }
    }

    pub fn leaf_counts(&self, x: &[f64]) -> &[u32; N_CLASSES] {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    /// Majority class of the reached leaf, ties to the lowest index.
    pub fn vote(&self, x: &[f64]) -> usize {
        let c = self.leaf_counts(x);
        argmax(&c.map(f64::from))
    }

    /// `(feature, threshold, gain)` of every split in pre-order.
    pub fn splits(&self) -> Vec<(usize, f64, f64)> {
        fn walk(n: &Node, out: &mut Vec<(usize, f64, f64)>) {
            if let Node::Split {
                feature,
                threshold,
                gain,
                left,
                right,
            } = n
            {
                out.push((*feature, *threshold, *gain));
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }
}

/// The `n` row indices (with replacement) tree `tree` is fitted on.
pub fn bootstrap_indices(seed: u64, tree: usize, n: usize) -> Vec<usize> {
    let mut rng = rng::stream(seed, Domain::Bootstrap, tree as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub dim: usize,
    pub classes: Vec<EventLabel>,
    pub n_train: usize,
    pub trees: Vec<DecisionTree>,
}

impl TrainedModel for ForestModel {
    fn head(&self) -> &'static str {
        "rf"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    /// Fraction of trees voting for each class.
    fn scores(&self, x: &[f64]) -> Result<Scores> {
        self.check_dim(x)?;
        let mut votes = [0usize; N_CLASSES];
        for t in &self.trees {
            votes[t.vote(x)] += 1;
        }
        let n = self.trees.len() as f64;
        Ok(votes.map(|v| v as f64 / n))
    }

    fn to_any(&self) -> super::AnyModel {
        super::AnyModel::Rf(self.clone())
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    pub config: ForestConfig,
}

impl RandomForest {
    pub fn new(config: ForestConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn train(&self, x: &[&[f64]], y: &[EventLabel]) -> Result<ForestModel> {
        let (dim, classes) = check_training(x, y)?;
        let cfg = &self.config;
        let params = TreeParams {
            max_depth: cfg.max_depth,
            min_samples_leaf: cfg.min_samples_leaf,
            mtry: cfg.mtry_for(dim),
        };
        let trees = (0..cfg.n_trees)
            .into_par_iter()
            .map(|t| {
                let sample = bootstrap_indices(cfg.seed, t, x.len());
                let mut rng = rng::stream(cfg.seed, Domain::FeatureSample, t as u64);
                DecisionTree::fit(x, y, &sample, params, &mut rng)
            })
            .collect();
        Ok(ForestModel {
            config: cfg.clone(),
            dim,
            classes,
            n_train: x.len(),
            trees,
        })
    }
}

impl ClassifierHead for RandomForest {
    fn name(&self) -> &'static str {
        "rf"
    }

    fn fit(&self, x: &[&[f64]], y: &[EventLabel]) -> Result<Box<dyn TrainedModel>> {
        Ok(Box::new(self.train(x, y)?))
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "head": "rf", "config": self.config })
    }
}

pub fn rf_train(train: &[FeatureVector], cfg: &ForestConfig) -> Result<ForestModel> {
    let (x, y) = super::as_training(train);
    RandomForest::new(cfg.clone())?.train(&x, &y)
}
