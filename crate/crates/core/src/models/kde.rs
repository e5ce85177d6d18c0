//! Isotropic Gaussian kernel density estimate.

use serde::{Deserialize, Serialize};

use super::BlackBox;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    pub support: Vec<Vec<f64>>,
    pub bandwidth: f64,
}

impl KdeModel {
    pub fn new(support: Vec<Vec<f64>>, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be > 0, got {bandwidth}")));
        }
        let d = support.first().map(Vec::len).ok_or_else(|| Error::Config("KDE needs at least one support point".into()))?;
        if d == 0 || support.iter().any(|r| r.len() != d) {
            return Err(Error::Config("KDE support rows must share a non-zero dimension".into()));
        }
        Ok(Self { support, bandwidth })
    }

    /// `(2π)^{-D/2} h^{-D}`
    pub fn normalizer(&self) -> f64 {
        let d = self.dim() as f64;
        (2.0 * std::f64::consts::PI).powf(-d / 2.0) * self.bandwidth.powf(-d)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let inv = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        let total: f64 = self
            .support
            .iter()
            .map(|p| {
                let r2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (-r2 * inv).exp()
            })
            .sum();
        self.normalizer() * total / self.support.len() as f64
    }
}

impl BlackBox for KdeModel {
    fn dim(&self) -> usize {
        self.support[0].len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.density(x)
    }
}

/// `f(x) · p̂(x)`
#[derive(Debug, Clone)]
pub struct DensityWeighted<F> {
    pub model: F,
    pub density: KdeModel,
}

pub fn density_weighted<F: BlackBox>(model: F, density: KdeModel) -> Result<DensityWeighted<F>> {
    if model.dim() != density.dim() {
        return Err(Error::Config(format!(
            "model has {} dims but density has {}",
            model.dim(),
            density.dim()
        )));
    }
    Ok(DensityWeighted { model, density })
}

impl<F: BlackBox> BlackBox for DensityWeighted<F> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.model.eval(x) * self.density.density(x)
    }
}
