//! Analytic functions with known box means, used to check the optimizer.

use serde::{Deserialize, Serialize};

use super::BlackBox;
use crate::domain::BoxDomain;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "snake_case")]
pub enum TestFunction {
    /// `value` everywhere.
    Constant { dim: usize, value: f64 },
    /// `offset + w · x`.
    Linear { weights: Vec<f64>, offset: f64 },
    /// `scale - Σ (x_i - center_i)^2`.
    QuadraticBowl { center: Vec<f64>, scale: f64 },
    /// `height · exp(-‖x - center‖² / (2 width²))`.
    GaussianBump { center: Vec<f64>, width: f64, height: f64 },
}

impl TestFunction {
    pub fn quadratic_bowl(center: Vec<f64>, scale: f64) -> Self {
        TestFunction::QuadraticBowl { center, scale }
    }

    /// Exact uniform mean over `domain`, where one exists in closed form.
    pub fn box_mean(&self, domain: &BoxDomain) -> Option<f64> {
        match self {
            TestFunction::Constant { value, .. } => Some(*value),
            TestFunction::Linear { weights, offset } => Some(
                offset + weights.iter().zip(&domain.centers).map(|(w, c)| w * c).sum::<f64>(),
            ),
            TestFunction::QuadraticBowl { center, scale } => Some(
                scale
                    - center
                        .iter()
                        .zip(domain.centers.iter().zip(&domain.half_lengths))
                        .map(|(m, (c, s))| (c - m).powi(2) + s * s / 3.0)
                        .sum::<f64>(),
            ),
            TestFunction::GaussianBump { .. } => None,
        }
    }
}

impl BlackBox for TestFunction {
    fn dim(&self) -> usize {
        match self {
            TestFunction::Constant { dim, .. } => *dim,
            TestFunction::Linear { weights, .. } => weights.len(),
            TestFunction::QuadraticBowl { center, .. } | TestFunction::GaussianBump { center, .. } => {
                center.len()
            }
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Constant { value, .. } => *value,
            TestFunction::Linear { weights, offset } => {
                offset + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            }
            TestFunction::QuadraticBowl { center, scale } => {
                scale - center.iter().zip(x).map(|(c, v)| (v - c).powi(2)).sum::<f64>()
            }
            TestFunction::GaussianBump { center, width, height } => {
                let r2: f64 = center.iter().zip(x).map(|(c, v)| (v - c).powi(2)).sum();
                height * (-r2 / (2.0 * width * width)).exp()
            }
        }
    }
}
