//! CSV ingestion and the tabular preprocessing pipeline: median fill,
//! standard-score normalization, one-hot encoding and a seeded train/test
//! split.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{BoxDomain, DimSpec, FeatureSchema};
use crate::error::{Error, Result};

/// Categorical columns with more modalities than this are rejected.
pub const MAX_MODALITIES: usize = 32;

const MISSING_TOKENS: [&str; 5] = ["", "?", "NA", "NaN", "nan"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// Retained columns of a CSV file, typed, plus the binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularData {
    pub columns: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub rows: Vec<Vec<Cell>>,
    pub label: String,
    pub labels: Vec<u8>,
}

impl TabularData {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// The seven Titanic features kept for the experiments, label `survived`.
pub fn titanic_columns() -> Vec<(String, ColumnKind)> {
    [
        ("age", ColumnKind::Numeric),
        ("sibsp", ColumnKind::Numeric),
        ("parch", ColumnKind::Numeric),
        ("fare", ColumnKind::Numeric),
        ("sex", ColumnKind::Categorical),
        ("pclass", ColumnKind::Categorical),
        ("embarked", ColumnKind::Categorical),
    ]
    .into_iter()
    .map(|(n, k)| (n.to_string(), k))
    .collect()
}

pub fn load_csv(path: impl AsRef<Path>, columns: &[(String, ColumnKind)], label: &str) -> Result<TabularData> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_csv(file, columns, label)
}

/// Parses a headed CSV, keeping `columns` (in the given order) and the label.
pub fn read_csv<R: Read>(input: R, columns: &[(String, ColumnKind)], label: &str) -> Result<TabularData> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let position = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column '{name}' not found in header {header:?}")))
    };
    let idx: Vec<usize> = columns.iter().map(|(n, _)| position(n)).collect::<Result<_>>()?;
    let label_idx = position(label)?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, got {}", header.len(), rec.len()),
            });
        }
        let row = idx
            .iter()
            .zip(columns)
            .map(|(&i, (name, kind))| {
                let raw = rec[i].trim();
                if MISSING_TOKENS.contains(&raw) {
                    return Ok(Cell::Missing);
                }
                match kind {
                    ColumnKind::Numeric => raw.parse::<f64>().map(Cell::Number).map_err(|_| Error::Parse {
                        line,
                        message: format!("column '{name}': '{raw}' is not a number"),
                    }),
                    ColumnKind::Categorical => Ok(Cell::Text(raw.to_string())),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let y = match rec[label_idx].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("label '{label}' must be 0 or 1, got '{other}'"),
                })
            }
        };
        rows.push(row);
        labels.push(y);
    }
    Ok(TabularData {
        columns: columns.iter().map(|(n, _)| n.clone()).collect(),
        kinds: columns.iter().map(|(_, k)| *k).collect(),
        rows,
        label: label.to_string(),
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub schema: FeatureSchema,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ColumnEncoder {
    Numeric { fill: f64, mean: f64, std: f64 },
    OneHot { modalities: Vec<String>, fill: String },
}

/// Encoding statistics fitted on a training split, reusable on any rows of the
/// same table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    encoders: Vec<ColumnEncoder>,
    schema: FeatureSchema,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl Preprocessor {
    /// Fits fill values and normalization statistics on `train_rows`.
    /// Modality order is first appearance over the whole table.
    pub fn fit(data: &TabularData, train_rows: &[usize]) -> Result<Self> {
        if train_rows.is_empty() {
            return Err(Error::Config("no training rows to fit preprocessing on".into()));
        }
        let mut encoders = Vec::new();
        let mut dims = Vec::new();
        let mut group_names = Vec::new();
        for (c, (name, kind)) in data.columns.iter().zip(&data.kinds).enumerate() {
            match kind {
                ColumnKind::Numeric => {
                    let present: Vec<f64> = train_rows
                        .iter()
                        .filter_map(|&r| match data.rows[r][c] {
                            Cell::Number(v) => Some(v),
                            _ => None,
                        })
                        .collect();
                    if present.is_empty() {
                        return Err(Error::Config(format!("numeric column '{name}' has no values in the training split")));
                    }
                    let fill = median(present);
                    let filled: Vec<f64> = train_rows
                        .iter()
                        .map(|&r| match data.rows[r][c] {
                            Cell::Number(v) => v,
                            _ => fill,
                        })
                        .collect();
                    let n = filled.len() as f64;
                    let mean = filled.iter().sum::<f64>() / n;
                    let var = filled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
                    encoders.push(ColumnEncoder::Numeric { fill, mean, std });
                    dims.push(DimSpec {
                        norm_mean: mean,
                        norm_std: std,
                        ..DimSpec::numeric(name.clone())
                    });
                }
                ColumnKind::Categorical => {
                    let mut modalities: Vec<String> = Vec::new();
                    for row in &data.rows {
                        if let Cell::Text(t) = &row[c] {
                            if !modalities.contains(t) {
                                modalities.push(t.clone());
                            }
                        }
                    }
                    if modalities.len() > MAX_MODALITIES {
                        return Err(Error::Config(format!(
                            "categorical column '{name}' has {} modalities (limit {MAX_MODALITIES})",
                            modalities.len()
                        )));
                    }
                    let mut counts: HashMap<&str, usize> = HashMap::new();
                    for &r in train_rows {
                        if let Cell::Text(t) = &data.rows[r][c] {
                            *counts.entry(t.as_str()).or_default() += 1;
                        }
                    }
                    // Most frequent in training; ties go to the earlier modality.
                    let fill = modalities
                        .iter()
                        .max_by(|a, b| {
                            let (ca, cb) = (counts.get(a.as_str()), counts.get(b.as_str()));
                            ca.cmp(&cb).then_with(|| {
                                let pos = |m: &String| modalities.iter().position(|x| x == m);
                                pos(b).cmp(&pos(a))
                            })
                        })
                        .cloned()
                        .ok_or_else(|| Error::Config(format!("categorical column '{name}' has no values")))?;
                    let g = group_names.len();
                    group_names.push(name.clone());
                    for m in &modalities {
                        dims.push(DimSpec::one_hot(format!("{name}={m}"), g));
                    }
                    encoders.push(ColumnEncoder::OneHot { modalities, fill });
                }
            }
        }
        let schema = FeatureSchema::from_dims(dims, group_names)?;
        Ok(Self { encoders, schema })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn encode_row(&self, row: &[Cell]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.schema.dim());
        for (cell, enc) in row.iter().zip(&self.encoders) {
            match enc {
                ColumnEncoder::Numeric { fill, mean, std } => {
                    let v = match cell {
                        Cell::Number(v) => *v,
                        _ => *fill,
                    };
                    out.push((v - mean) / std);
                }
                ColumnEncoder::OneHot { modalities, fill } => {
                    let value = match cell {
                        Cell::Text(t) => t,
                        _ => fill,
                    };
                    let hit = modalities
                        .iter()
                        .position(|m| m == value)
                        .ok_or_else(|| Error::Config(format!("unknown modality '{value}'")))?;
                    out.extend((0..modalities.len()).map(|k| if k == hit { 1.0 } else { 0.0 }));
                }
            }
        }
        Ok(out)
    }

    pub fn transform(&self, data: &TabularData, rows: &[usize]) -> Result<EncodedDataset> {
        let features = rows
            .iter()
            .map(|&r| self.encode_row(&data.rows[r]))
            .collect::<Result<Vec<_>>>()?;
        Ok(EncodedDataset {
            features,
            labels: rows.iter().map(|&r| data.labels[r]).collect(),
            schema: self.schema.clone(),
        })
    }

    /// Every row of `data`, in file order.
    pub fn transform_all(&self, data: &TabularData) -> Result<EncodedDataset> {
        let all: Vec<usize> = (0..data.len()).collect();
        self.transform(data, &all)
    }
}

/// Seeded partition of `0..n` into `(train, test)` row indices.
pub fn split_indices(n: usize, split_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must be in (0, 1), got {split_fraction}")));
    }
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 rows to split, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64 * split_fraction).round() as usize).clamp(1, n - 1);
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

/// Splits, fits the encoding on the training part and encodes both parts.
pub fn preprocess(data: &TabularData, split_fraction: f64, seed: u64) -> Result<(EncodedDataset, EncodedDataset)> {
    let (train_rows, test_rows) = split_indices(data.len(), split_fraction, seed)?;
    let pre = Preprocessor::fit(data, &train_rows)?;
    Ok((pre.transform(data, &train_rows)?, pre.transform(data, &test_rows)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericInterval {
    pub name: String,
    pub center: f64,
    pub half_length: f64,
    pub raw_lower: f64,
    pub raw_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalChoice {
    pub feature: String,
    pub modality: String,
    pub modalities: Vec<String>,
    pub centers: Vec<f64>,
    pub half_lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainReport {
    pub numeric: Vec<NumericInterval>,
    pub categorical: Vec<CategoricalChoice>,
}

/// Maps a normalized half-open interval back to raw units.
pub fn denormalize_interval(center: f64, half_length: f64, mean: f64, std: f64) -> (f64, f64) {
    (mean + (center - half_length) * std, mean + (center + half_length) * std)
}

/// Inverse of [`denormalize_interval`].
pub fn renormalize_interval(lower: f64, upper: f64, mean: f64, std: f64) -> (f64, f64) {
    (((lower + upper) / 2.0 - mean) / std, (upper - lower) / (2.0 * std))
}

pub fn denormalize_report(domain: &BoxDomain, schema: &FeatureSchema) -> Result<DomainReport> {
    if domain.dim() != schema.dim() {
        return Err(Error::Schema(format!("box has {} dims, schema has {}", domain.dim(), schema.dim())));
    }
    let numeric = schema
        .numeric_dims()
        .map(|i| {
            let d = &schema.dims[i];
            let (c, s) = (domain.centers[i], domain.half_lengths[i]);
            let (raw_lower, raw_upper) = denormalize_interval(c, s, d.norm_mean, d.norm_std);
            NumericInterval {
                name: d.name.clone(),
                center: c,
                half_length: s,
                raw_lower,
                raw_upper,
            }
        })
        .collect();
    let categorical = schema
        .groups
        .iter()
        .enumerate()
        .map(|(g, members)| {
            let centers: Vec<f64> = members.iter().map(|&i| domain.centers[i]).collect();
            let best = centers
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map_or(0, |(k, _)| k);
            CategoricalChoice {
                feature: schema.group_name(g),
                modality: schema.modality_name(members[best]).to_string(),
                modalities: members.iter().map(|&i| schema.modality_name(i).to_string()).collect(),
                centers,
                half_lengths: members.iter().map(|&i| domain.half_lengths[i]).collect(),
            }
        })
        .collect();
    Ok(DomainReport { numeric, categorical })
}

impl fmt::Display for DomainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.numeric {
            writeln!(
                f,
                "{:<12} [{:.4}, {:.4}]  (normalized c = {:.4}, σ = {:.4})",
                n.name, n.raw_lower, n.raw_upper, n.center, n.half_length
            )?;
        }
        for c in &self.categorical {
            let detail: Vec<String> = c
                .modalities
                .iter()
                .zip(c.centers.iter().zip(&c.half_lengths))
                .map(|(m, (c, s))| format!("{m}: c={c:.3} σ={s:.3}"))
                .collect();
            writeln!(f, "{:<12} = {}  ({})", c.feature, c.modality, detail.join(", "))?;
        }
        Ok(())
    }
}
