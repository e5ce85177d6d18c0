//! Black-box functions consumed by the optimizer.
//!
//! The optimizer only ever calls [`BlackBox::eval`]; models never need to be
//! differentiable.

pub mod forest;
pub mod kde;
pub mod metrics;
pub mod mlp;
pub mod testfns;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{forest_train, ForestConfig, TreeEnsemble, TreeNode};
pub use kde::{density_weighted, DensityWeighted, KdeModel};
pub use mlp::{mlp_train, MlpConfig, MlpModel};
pub use testfns::TestFunction;

/// A pure function of a `dim()`-long input: equal inputs give bit-identical
/// outputs and evaluation has no side effects.
pub trait BlackBox: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
}

impl<T: BlackBox + ?Sized> BlackBox for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
}

impl<T: BlackBox + ?Sized> BlackBox for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
}

impl<T: BlackBox + ?Sized> BlackBox for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
}

/// Wraps a closure as a black box.
pub struct FnBlackBox<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnBlackBox<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> BlackBox for FnBlackBox<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Any serializable model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Mlp(MlpModel),
    Forest(TreeEnsemble),
    Kde(KdeModel),
    Builtin(TestFunction),
}

impl BlackBox for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Mlp(m) => m.dim(),
            Model::Forest(m) => m.dim(),
            Model::Kde(m) => m.dim(),
            Model::Builtin(m) => m.dim(),
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Model::Mlp(m) => m.eval(x),
            Model::Forest(m) => m.eval(x),
            Model::Kde(m) => m.eval(x),
            Model::Builtin(m) => m.eval(x),
        }
    }
}

/// Validates a training set and returns its feature dimension.
pub(crate) fn check_training_data(features: &[Vec<f64>], labels: &[u8]) -> Result<usize> {
    if features.len() < 2 {
        return Err(Error::Training(format!("need at least 2 rows, got {}", features.len())));
    }
    if features.len() != labels.len() {
        return Err(Error::Training(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|r| r.len() != d) {
        return Err(Error::Training("feature rows must share a non-zero width".into()));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Training("features contain non-finite values".into()));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::Training("labels must be 0 or 1".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::Training("labels contain a single class".into()));
    }
    Ok(d)
}
