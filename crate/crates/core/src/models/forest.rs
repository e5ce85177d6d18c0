//! Bagged CART classification trees. Leaves store the fraction of positive
//! labels; the ensemble prediction is the mean over trees.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_data, BlackBox};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature, left, right, ..
            } => Some(
                (*feature)
                    .max(left.max_feature().unwrap_or(0))
                    .max(right.max_feature().unwrap_or(0)),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub dim: usize,
    pub trees: Vec<TreeNode>,
}

impl TreeEnsemble {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn is_consistent(&self) -> bool {
        !self.trees.is_empty()
            && self
                .trees
                .iter()
                .all(|t| t.max_feature().is_none_or(|f| f < self.dim))
    }
}

impl BlackBox for TreeEnsemble {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.predict(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    /// Features tried per split; `None` means `ceil(sqrt(D))`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 6,
            bootstrap: true,
            max_features: None,
            seed: 0,
        }
    }
}

struct Grower<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [u8],
    max_depth: usize,
    mtry: usize,
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

impl Grower<'_> {
    fn grow(&self, rows: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> TreeNode {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.labels[r] == 1).count();
        let leaf = TreeNode::Leaf {
            value: pos as f64 / n as f64,
        };
        if depth >= self.max_depth || n < 2 || pos == 0 || pos == n {
            return leaf;
        }
        let d = self.features[0].len();
        let parent = gini(pos as f64, n as f64);

        // (weighted impurity, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        for feature in sample(rng, d, self.mtry.min(d)).into_iter() {
            rows.sort_by(|&a, &b| self.features[a][feature].total_cmp(&self.features[b][feature]));
            let mut left_pos = 0usize;
            for k in 0..n - 1 {
                if self.labels[rows[k]] == 1 {
                    left_pos += 1;
                }
                let (lo, hi) = (self.features[rows[k]][feature], self.features[rows[k + 1]][feature]);
                if lo == hi {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = (n - k - 1) as f64;
                let score = (nl * gini(left_pos as f64, nl) + nr * gini((pos - left_pos) as f64, nr)) / n as f64;
                if best.is_none_or(|(s, _, _)| score < s) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((score, feature, threshold));
                }
            }
        }
        let Some((score, feature, threshold)) = best else {
            return leaf;
        };
        if score >= parent {
            return leaf;
        }
        let split = partition(rows, |r| self.features[r][feature] <= threshold);
        let (left_rows, right_rows) = rows.split_at_mut(split);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(self.grow(left_rows, depth + 1, rng)),
            right: Box::new(self.grow(right_rows, depth + 1, rng)),
        }
    }
}

/// Stable in-place partition; returns the number of rows satisfying `pred`.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (mut yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| pred(r));
    let split = yes.len();
    yes.extend(no);
    rows.copy_from_slice(&yes);
    split
}

pub fn forest_train(features: &[Vec<f64>], labels: &[u8], cfg: &ForestConfig) -> Result<TreeEnsemble> {
    let d = check_training_data(features, labels)?;
    let n = features.len();
    let mtry = cfg
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let grower = Grower {
        features,
        labels,
        max_depth: cfg.max_depth,
        mtry,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trees = (0..cfg.n_trees.max(1))
        .map(|_| {
            let mut rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grower.grow(&mut rows, 0, &mut rng)
        })
        .collect();
    Ok(TreeEnsemble { dim: d, trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn threshold_data() -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..20 {
            xs.push(vec![i as f64 * 0.05]);
            ys.push(0);
            xs.push(vec![5.0 + i as f64 * 0.05]);
            ys.push(1);
        }
        (xs, ys)
    }

    #[test]
    fn single_stump_recovers_threshold() {
        let (xs, ys) = threshold_data();
        for bootstrap in [false, true] {
            let cfg = ForestConfig { n_trees: 1, max_depth: 1, bootstrap, seed: 7, ..Default::default() };
            let f = forest_train(&xs, &ys, &cfg).unwrap();
            match &f.trees[0] {
                TreeNode::Split { feature, threshold, .. } => {
                    assert_eq!(*feature, 0);
                    assert!(*threshold > 0.95 && *threshold < 5.0, "{threshold}");
                }
                other => panic!("expected a split, got {other:?}"),
            }
            let hits = xs.iter().zip(&ys).filter(|(x, &y)| (f.predict(x) >= 0.5) == (y == 1)).count();
            assert_eq!(hits, xs.len());
        }
    }

    #[test]
    fn predictions_in_unit_interval_and_depth_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<Vec<f64>> = (0..200).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<u8> = xs.iter().map(|x| (x[0] * x[1] + 0.3 * x[2] > 0.0) as u8).collect();
        let f = forest_train(&xs, &ys, &ForestConfig { n_trees: 20, max_depth: 4, seed: 2, ..Default::default() }).unwrap();
        assert!(f.is_consistent());
        assert!(f.trees.iter().all(|t| t.depth() <= 4));
        for x in &xs {
            let p = f.eval(x);
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn seed_determinism_and_errors() {
        let (xs, ys) = threshold_data();
        let cfg = ForestConfig { n_trees: 5, seed: 4, ..Default::default() };
        assert_eq!(forest_train(&xs, &ys, &cfg).unwrap(), forest_train(&xs, &ys, &cfg).unwrap());
        assert!(matches!(forest_train(&xs, &vec![0; xs.len()], &cfg), Err(Error::Training(_))));
    }
}
