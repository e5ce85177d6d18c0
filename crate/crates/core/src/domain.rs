//! Value types shared by every stage of the optimization: the box being
//! searched, per-dimension feature metadata and constraints, penalty weights
//! and the optimizer configuration.
//!
//! Everything here is an immutable value after construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default floor for free half-lengths.
pub const DEFAULT_SIGMA_MIN: f64 = 1e-3;

/// Axis-aligned box `Π [c_i - σ_i, c_i + σ_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub centers: Vec<f64>,
    pub half_lengths: Vec<f64>,
}

impl BoxDomain {
    pub fn new(centers: Vec<f64>, half_lengths: Vec<f64>) -> Result<Self> {
        let domain = Self {
            centers,
            half_lengths,
        };
        domain.validate()?;
        Ok(domain)
    }

    /// Box of equal half-length `half` around `centers`.
    pub fn around(centers: Vec<f64>, half: f64) -> Result<Self> {
        let half_lengths = vec![half; centers.len()];
        Self::new(centers, half_lengths)
    }

    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    pub fn lower(&self, i: usize) -> f64 {
        self.centers[i] - self.half_lengths[i]
    }

    pub fn upper(&self, i: usize) -> f64 {
        self.centers[i] + self.half_lengths[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|i| x[i] >= self.lower(i) && x[i] <= self.upper(i))
    }

    /// Checks shape, finiteness and strictly positive half-lengths.
    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::Domain("box has no dimensions".into()));
        }
        if self.centers.len() != self.half_lengths.len() {
            return Err(Error::Domain(format!(
                "{} centers but {} half-lengths",
                self.centers.len(),
                self.half_lengths.len()
            )));
        }
        for (i, (&c, &s)) in self.centers.iter().zip(&self.half_lengths).enumerate() {
            if !c.is_finite() {
                return Err(Error::Domain(format!("center {i} is not finite ({c})")));
            }
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Domain(format!(
                    "half-length {i} must be finite and positive, got {s}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimKind {
    Numeric,
    /// Member of the categorical group with this index.
    OneHot(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    #[default]
    Free,
    /// The dimension is pinned to a single value and excluded from optimization.
    FixedValue(f64),
    /// The dimension keeps this interval and is excluded from optimization.
    FixedInterval { center: f64, half_length: f64 },
}

impl Constraint {
    pub fn is_free(&self) -> bool {
        matches!(self, Constraint::Free)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSpec {
    pub name: String,
    pub kind: DimKind,
    pub norm_mean: f64,
    pub norm_std: f64,
    #[serde(default)]
    pub constraint: Constraint,
}

impl DimSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: DimKind::Numeric,
            norm_mean: 0.0,
            norm_std: 1.0,
            constraint: Constraint::Free,
        }
    }

    pub fn one_hot(name: impl Into<String>, group: usize) -> Self {
        Self {
            name: name.into(),
            kind: DimKind::OneHot(group),
            norm_mean: 0.0,
            norm_std: 1.0,
            constraint: Constraint::Free,
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.kind == DimKind::Numeric
    }
}

/// Per-dimension metadata plus the one-hot group structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub dims: Vec<DimSpec>,
    /// Dimension indices of each categorical feature's one-hot columns.
    pub groups: Vec<Vec<usize>>,
    /// Name of the categorical feature behind each group. Optional in JSON.
    #[serde(default)]
    pub group_names: Vec<String>,
}

impl FeatureSchema {
    /// Schema of `d` free numeric dimensions named `x0..`, identity normalization.
    pub fn numeric(d: usize) -> Self {
        Self {
            dims: (0..d).map(|i| DimSpec::numeric(format!("x{i}"))).collect(),
            groups: Vec::new(),
            group_names: Vec::new(),
        }
    }

    /// Builds a schema from dims, deriving `groups` from the `OneHot` tags.
    pub fn from_dims(dims: Vec<DimSpec>, group_names: Vec<String>) -> Result<Self> {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); group_names.len()];
        for (i, d) in dims.iter().enumerate() {
            if let DimKind::OneHot(g) = d.kind {
                groups
                    .get_mut(g)
                    .ok_or_else(|| Error::Schema(format!("dim {} refers to unknown group {g}", d.name)))?
                    .push(i);
            }
        }
        let schema = Self {
            dims,
            groups,
            group_names,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Schema("schema has no dimensions".into()));
        }
        if !self.group_names.is_empty() && self.group_names.len() != self.groups.len() {
            return Err(Error::Schema(format!(
                "{} group names for {} groups",
                self.group_names.len(),
                self.groups.len()
            )));
        }
        let mut owner = vec![None; self.dims.len()];
        for (g, members) in self.groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::Schema(format!("group {g} is empty")));
            }
            for &i in members {
                let slot = owner
                    .get_mut(i)
                    .ok_or_else(|| Error::Schema(format!("group {g} refers to dim {i} out of range")))?;
                if slot.is_some() {
                    return Err(Error::Schema(format!("dim {i} belongs to more than one group")));
                }
                *slot = Some(g);
            }
        }
        for (i, (d, g)) in self.dims.iter().zip(&owner).enumerate() {
            match (d.kind, g) {
                (DimKind::Numeric, None) => {
                    if !(d.norm_std > 0.0 && d.norm_std.is_finite()) {
                        return Err(Error::Schema(format!(
                            "numeric dim {} has non-positive norm_std {}",
                            d.name, d.norm_std
                        )));
                    }
                }
                (DimKind::OneHot(tag), Some(g)) if tag == *g => {}
                _ => {
                    return Err(Error::Schema(format!(
                        "dim {i} ({}) kind disagrees with group membership",
                        d.name
                    )))
                }
            }
            match d.constraint {
                Constraint::FixedInterval { half_length, center } => {
                    if !(half_length > 0.0 && half_length.is_finite() && center.is_finite()) {
                        return Err(Error::Schema(format!(
                            "dim {} has invalid fixed interval ({center}, {half_length})",
                            d.name
                        )));
                    }
                }
                Constraint::FixedValue(v) if !v.is_finite() => {
                    return Err(Error::Schema(format!("dim {} has non-finite fixed value", d.name)));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.group_names.iter().position(|g| g == name)
    }

    pub fn group_name(&self, g: usize) -> String {
        self.group_names
            .get(g)
            .cloned()
            .unwrap_or_else(|| format!("group{g}"))
    }

    /// Modality label of a one-hot dim: the part of its name after `=`, or the full name.
    pub fn modality_name(&self, i: usize) -> &str {
        let name = &self.dims[i].name;
        name.split_once('=').map_or(name.as_str(), |(_, m)| m)
    }

    pub fn numeric_dims(&self) -> impl Iterator<Item = usize> + '_ {
        self.dims
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_numeric())
            .map(|(i, _)| i)
    }
}

/// Weights of the half-length gain and the four penalties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PenaltyWeights {
    pub lambda: f64,
    pub beta: f64,
    pub mu: f64,
    pub omega: f64,
    pub gamma: f64,
}

impl PenaltyWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("mu", self.mu),
            ("omega", self.omega),
            ("gamma", self.gamma),
        ];
        for (name, w) in all {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("weight {name} must be finite and >= 0, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    Maximize,
    Minimize,
    /// Drive the box mean toward this value.
    TargetMean(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    GradientAscent,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub iterations: usize,
    pub sample_count: usize,
    pub learning_rate: f64,
    pub optimizer_kind: OptimizerKind,
    pub sigma_min: f64,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            sample_count: 50,
            learning_rate: 0.07,
            optimizer_kind: OptimizerKind::adam(),
            sigma_min: DEFAULT_SIGMA_MIN,
            ridge: 1e-6,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.sample_count < 2 {
            return Err(Error::Config("sample_count must be >= 2".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min.is_finite()) {
            return Err(Error::Config("sigma_min must be > 0".into()));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::Config("ridge must be >= 0".into()));
        }
        if let OptimizerKind::Adam { beta1, beta2, epsilon } = self.optimizer_kind {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || epsilon <= 0.0 {
                return Err(Error::Config("Adam needs 0 <= beta1, beta2 < 1 and epsilon > 0".into()));
            }
        }
        Ok(())
    }
}

/// `true` at every dimension the optimizer may move.
pub fn free_mask(schema: &FeatureSchema) -> Vec<bool> {
    schema.dims.iter().map(|d| d.constraint.is_free()).collect()
}

/// Overwrites constrained dimensions with their configured `(c, σ)`.
///
/// A `FixedValue(v)` dim becomes the sliver `(v, sigma_min)`; sampling treats it
/// as exactly `v`.
pub fn apply_constraints(domain: &BoxDomain, schema: &FeatureSchema, sigma_min: f64) -> Result<BoxDomain> {
    if domain.dim() != schema.dim() || domain.half_lengths.len() != schema.dim() {
        return Err(Error::Schema(format!(
            "box has {} dims but schema has {}",
            domain.dim(),
            schema.dim()
        )));
    }
    let mut out = domain.clone();
    for (i, d) in schema.dims.iter().enumerate() {
        match d.constraint {
            Constraint::Free => {}
            Constraint::FixedValue(v) => {
                out.centers[i] = v;
                out.half_lengths[i] = sigma_min;
            }
            Constraint::FixedInterval { center, half_length } => {
                out.centers[i] = center;
                out.half_lengths[i] = half_length;
            }
        }
    }
    Ok(out)
}
