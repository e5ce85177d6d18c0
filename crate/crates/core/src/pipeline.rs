//! Dataset-to-artifact steps shared by the CLI and the test suites.

use serde::{Deserialize, Serialize};

use crate::case::{DensityFile, ModelFile, TestMetrics};
use crate::dataset::{split_indices, Preprocessor, TabularData};
use crate::error::Result;
use crate::models::{forest_train, mlp_train, ForestConfig, KdeModel, MlpConfig, Model};

pub const DEFAULT_SPLIT: f64 = 0.8;
pub const DEFAULT_BANDWIDTH: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    Forest,
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "forest" => Ok(ModelKind::Forest),
            other => Err(format!("unknown model kind '{other}' (expected mlp or forest)")),
        }
    }
}

/// Splits with `seed`, trains on the training part and scores the test part.
pub fn train_model(data: &TabularData, kind: ModelKind, split: f64, seed: u64) -> Result<ModelFile> {
    let (train_rows, test_rows) = split_indices(data.len(), split, seed)?;
    let pre = Preprocessor::fit(data, &train_rows)?;
    let train = pre.transform(data, &train_rows)?;
    let test = pre.transform(data, &test_rows)?;
    let model = match kind {
        ModelKind::Mlp => Model::Mlp(mlp_train(
            &train.features,
            &train.labels,
            &MlpConfig { seed, ..Default::default() },
        )?),
        ModelKind::Forest => Model::Forest(forest_train(
            &train.features,
            &train.labels,
            &ForestConfig { seed, ..Default::default() },
        )?),
    };
    let metrics = TestMetrics::compute(&model, &test.features, &test.labels)?;
    Ok(ModelFile {
        model,
        schema: pre.schema().clone(),
        metrics: Some(metrics),
    })
}

/// KDE over every row of the table, encoded with the statistics of the
/// training split selected by `seed` (the same encoding [`train_model`] uses).
pub fn fit_density(data: &TabularData, bandwidth: f64, split: f64, seed: u64) -> Result<DensityFile> {
    let (train_rows, _) = split_indices(data.len(), split, seed)?;
    let pre = Preprocessor::fit(data, &train_rows)?;
    let all = pre.transform_all(data)?;
    Ok(DensityFile {
        density: KdeModel::new(all.features, bandwidth)?,
        schema: pre.schema().clone(),
    })
}
