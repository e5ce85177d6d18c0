//! Case configuration files and the runner that turns one into a trajectory
//! and a final-domain report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{denormalize_report, DomainReport};
use crate::domain::{
    apply_constraints, BoxDomain, Constraint, DimKind, FeatureSchema, ObjectiveMode, OptimizerConfig,
    PenaltyWeights,
};
use crate::error::{Error, Result};
use crate::models::metrics;
use crate::models::{density_weighted, BlackBox, KdeModel, Model, TestFunction};
use crate::objective::evaluate;
use crate::optimizer::{monte_carlo_mean, random_init, run, Trajectory};
use crate::surrogate::{fit, sample_box, SampleBatch};

/// Fresh samples behind the final-report mean.
pub const REPORT_SAMPLES: usize = 10_000;

/// Default half-length of a `data_row` start.
pub const DEFAULT_INIT_SIGMA: f64 = 0.1;

/// A trained model together with the schema of its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model: Model,
    pub schema: FeatureSchema,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<TestMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub auc: f64,
    pub accuracy: f64,
    pub test_rows: usize,
}

impl TestMetrics {
    pub fn compute(model: &dyn BlackBox, features: &[Vec<f64>], labels: &[u8]) -> Result<Self> {
        let scores: Vec<f64> = features.iter().map(|x| model.eval(x)).collect();
        let auc = metrics::roc_auc(&scores, labels)
            .ok_or_else(|| Error::Training("test split holds a single class".into()))?;
        Ok(Self {
            auc,
            accuracy: metrics::accuracy(&scores, labels),
            test_rows: labels.len(),
        })
    }
}

/// A fitted density with the schema its support was encoded with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityFile {
    pub density: KdeModel,
    pub schema: FeatureSchema,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRef {
    /// Path to a [`ModelFile`], relative to the config file.
    File(PathBuf),
    /// Analytic test function over free numeric dims `x0..`.
    Builtin(TestFunction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintRule {
    Value(f64),
    Interval { center: f64, half_length: f64 },
    /// Pin a categorical feature to one modality (chosen dim 1, siblings 0).
    Modality(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub feature: String,
    #[serde(flatten)]
    pub rule: ConstraintRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    #[default]
    Random,
    /// Small box around a row of the density's support (the encoded dataset).
    DataRow {
        index: usize,
        #[serde(default = "default_init_sigma")]
        sigma: f64,
    },
}

fn default_init_sigma() -> f64 {
    DEFAULT_INIT_SIGMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub name: String,
    pub model: ModelRef,
    pub mode: ObjectiveMode,
    pub weights: PenaltyWeights,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    /// Path to a [`DensityFile`], relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<PathBuf>,
    #[serde(default)]
    pub init: InitSpec,
}

impl CaseConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: CaseConfig = read_json(path)?;
        cfg.weights.validate()?;
        cfg.optimizer.validate()?;
        Ok(cfg)
    }
}

/// Returns a copy of `schema` with the case's constraints applied. Fails
/// before any computation if a feature or modality name does not resolve.
pub fn resolve_constraints(schema: &FeatureSchema, specs: &[ConstraintSpec]) -> Result<FeatureSchema> {
    let mut out = schema.clone();
    for spec in specs {
        match &spec.rule {
            ConstraintRule::Modality(modality) => {
                let g = schema.group_index(&spec.feature).ok_or_else(|| {
                    Error::Config(format!(
                        "'{}' is not a categorical feature (known: {})",
                        spec.feature,
                        schema.group_names.join(", ")
                    ))
                })?;
                let members = &schema.groups[g];
                let names: Vec<&str> = members.iter().map(|&i| schema.modality_name(i)).collect();
                let hit = names.iter().position(|m| m == modality).ok_or_else(|| {
                    Error::Config(format!(
                        "feature '{}' has no modality '{modality}'; valid modalities: {}",
                        spec.feature,
                        names.join(", ")
                    ))
                })?;
                for (k, &i) in members.iter().enumerate() {
                    out.dims[i].constraint = Constraint::FixedValue(if k == hit { 1.0 } else { 0.0 });
                }
            }
            rule => {
                let i = schema.index_of(&spec.feature).ok_or_else(|| {
                    let hint = if schema.group_index(&spec.feature).is_some() {
                        " (categorical features take a 'modality' constraint)"
                    } else {
                        ""
                    };
                    Error::Config(format!("unknown feature '{}'{hint}", spec.feature))
                })?;
                out.dims[i].constraint = match *rule {
                    ConstraintRule::Value(v) => Constraint::FixedValue(v),
                    ConstraintRule::Interval { center, half_length } => Constraint::FixedInterval { center, half_length },
                    ConstraintRule::Modality(_) => unreachable!(),
                };
            }
        }
    }
    out.validate()?;
    Ok(out)
}

/// Model, schema and optional density, loaded and checked for agreement.
#[derive(Debug, Clone)]
pub struct ResolvedInputs {
    pub model: Model,
    pub schema: FeatureSchema,
    pub density: Option<KdeModel>,
}

impl ResolvedInputs {
    /// Loads the files a config refers to, resolving paths against `base_dir`.
    pub fn load(cfg: &CaseConfig, base_dir: &Path) -> Result<Self> {
        let (model, schema) = match &cfg.model {
            ModelRef::File(p) => {
                let file: ModelFile = read_json(&base_dir.join(p))?;
                (file.model, file.schema)
            }
            ModelRef::Builtin(f) => (Model::Builtin(f.clone()), FeatureSchema::numeric(f.dim())),
        };
        let density = match &cfg.density {
            None => None,
            Some(p) => {
                let file: DensityFile = read_json(&base_dir.join(p))?;
                check_same_encoding(&schema, &file.schema)?;
                Some(file.density)
            }
        };
        Ok(Self { model, schema, density })
    }
}

fn check_same_encoding(model: &FeatureSchema, density: &FeatureSchema) -> Result<()> {
    let same = model.dims.len() == density.dims.len()
        && model.dims.iter().zip(&density.dims).all(|(a, b)| {
            a.name == b.name && a.kind == b.kind && a.norm_mean == b.norm_mean && a.norm_std == b.norm_std
        });
    if same {
        Ok(())
    } else {
        Err(Error::Config(
            "density and model were encoded differently (train both with the same data and seed)".into(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    /// Largest distance of a one-hot center from {0, 1}.
    pub max_binary_gap: f64,
    /// Largest |Σ group centers − 1| over groups.
    pub max_group_sum_gap: f64,
    /// Largest free one-hot half-length.
    pub max_one_hot_half_length: f64,
}

impl ConstraintResiduals {
    pub fn of(domain: &BoxDomain, schema: &FeatureSchema) -> Self {
        let one_hot = schema
            .dims
            .iter()
            .enumerate()
            .filter(|(_, d)| matches!(d.kind, DimKind::OneHot(_)));
        let mut r = Self {
            max_binary_gap: 0.0,
            max_group_sum_gap: 0.0,
            max_one_hot_half_length: 0.0,
        };
        for (i, d) in one_hot {
            let c = domain.centers[i];
            r.max_binary_gap = r.max_binary_gap.max(c.abs().min((1.0 - c).abs()));
            if d.constraint.is_free() {
                r.max_one_hot_half_length = r.max_one_hot_half_length.max(domain.half_lengths[i]);
            }
        }
        for g in &schema.groups {
            let sum: f64 = g.iter().map(|&i| domain.centers[i]).sum();
            r.max_group_sum_gap = r.max_group_sum_gap.max((sum - 1.0).abs());
        }
        r
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_binary_gap <= tol && self.max_group_sum_gap <= tol && self.max_one_hot_half_length <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: String,
    pub iterations: usize,
    pub final_centers: Vec<f64>,
    pub final_half_lengths: Vec<f64>,
    pub domain: DomainReport,
    /// Monte Carlo mean of the optimized black box over the final box.
    pub final_mean: f64,
    pub final_mean_stderr: f64,
    /// Same estimate for the start box.
    pub initial_mean: f64,
    /// Mean of the bare model (without density weighting) over the final box.
    pub final_model_mean: f64,
    pub final_objective: f64,
    pub pen_center: f64,
    pub pen_binary: f64,
    pub pen_cat_width: f64,
    pub pen_group_sum: f64,
    pub residuals: ConstraintResiduals,
}

#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub schema: FeatureSchema,
    pub init: BoxDomain,
    pub domain: BoxDomain,
    pub trajectory: Trajectory,
    pub report: CaseReport,
}

pub fn initial_domain(cfg: &CaseConfig, inputs: &ResolvedInputs, schema: &FeatureSchema) -> Result<BoxDomain> {
    let sigma_min = cfg.optimizer.sigma_min;
    match cfg.init {
        InitSpec::Random => random_init(schema, cfg.optimizer.seed, sigma_min),
        InitSpec::DataRow { index, sigma } => {
            let density = inputs
                .density
                .as_ref()
                .ok_or_else(|| Error::Config("init 'data_row' needs a density (its support holds the rows)".into()))?;
            let row = density.support.get(index).ok_or_else(|| {
                Error::Config(format!("data row {index} out of range ({} rows)", density.support.len()))
            })?;
            let domain = BoxDomain::around(row.clone(), sigma)?;
            apply_constraints(&domain, schema, sigma_min)
        }
    }
}

pub fn run_case(cfg: &CaseConfig, inputs: &ResolvedInputs) -> Result<CaseOutcome> {
    let schema = resolve_constraints(&inputs.schema, &cfg.constraints)?;
    if inputs.model.dim() != schema.dim() {
        return Err(Error::Config(format!(
            "model takes {} inputs but its schema has {} dims",
            inputs.model.dim(),
            schema.dim()
        )));
    }
    let init = initial_domain(cfg, inputs, &schema)?;
    let weighted;
    let black_box: &dyn BlackBox = match &inputs.density {
        Some(k) => {
            weighted = density_weighted(&inputs.model, k.clone())?;
            &weighted
        }
        None => &inputs.model,
    };
    let out = run(black_box, &schema, &init, &cfg.optimizer, &cfg.weights, cfg.mode)?;

    let report_seed = cfg.optimizer.seed ^ 0x5eed_0ff1_4a17;
    let (final_mean, final_mean_stderr) = monte_carlo_mean(black_box, &out.domain, &schema, REPORT_SAMPLES, report_seed)?;
    let (initial_mean, _) = monte_carlo_mean(black_box, &init, &schema, REPORT_SAMPLES, report_seed)?;
    let (final_model_mean, _) = monte_carlo_mean(&inputs.model, &out.domain, &schema, REPORT_SAMPLES, report_seed)?;

    // Objective breakdown at the final box, from a surrogate fitted on fresh samples.
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(report_seed.rotate_left(17));
    let inputs_k = sample_box(&out.domain, &schema, cfg.optimizer.sample_count, &mut rng);
    let outputs = inputs_k.iter().map(|x| black_box.eval(x)).collect();
    let surrogate = fit(&SampleBatch { inputs: inputs_k, outputs }, cfg.optimizer.ridge)?;
    let obj = evaluate(&surrogate, &out.domain, &schema, &cfg.weights, cfg.mode)?;

    let report = CaseReport {
        case: cfg.name.clone(),
        iterations: out.trajectory.len(),
        final_centers: out.domain.centers.clone(),
        final_half_lengths: out.domain.half_lengths.clone(),
        domain: denormalize_report(&out.domain, &schema)?,
        final_mean,
        final_mean_stderr,
        initial_mean,
        final_model_mean,
        final_objective: obj.value,
        pen_center: obj.pen_center,
        pen_binary: obj.pen_binary,
        pen_cat_width: obj.pen_cat_width,
        pen_group_sum: obj.pen_group_sum,
        residuals: ConstraintResiduals::of(&out.domain, &schema),
    };
    Ok(CaseOutcome {
        schema,
        init,
        domain: out.domain,
        trajectory: out.trajectory,
        report,
    })
}
