//! Outer loop: sample the box, fit the surrogate, evaluate the objective and
//! its gradient, take an ascent step, then clamp and re-apply constraints.

use std::io::{Read, Write};

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    apply_constraints, free_mask, BoxDomain, FeatureSchema, ObjectiveMode, OptimizerConfig, OptimizerKind,
    PenaltyWeights,
};
use crate::error::{Error, Result};
use crate::models::BlackBox;
use crate::objective::{evaluate, ObjectiveReport};
use crate::surrogate::{coefficient_count, fit, sample_box, QuadraticSurrogate, SampleBatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }
}

/// One ascent step on the entries where `mask` is true. Other entries, and
/// their Adam moments, are left untouched.
pub fn ascend_step(params: &mut [f64], grad: &[f64], state: Option<&mut AdamState>, lr: f64, mask: &[bool]) {
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), mask.len());
    match state {
        None => {
            for ((p, g), _) in params.iter_mut().zip(grad).zip(mask).filter(|(_, &m)| m) {
                *p += lr * g;
            }
        }
        Some(adam) => {
            assert_eq!(adam.m.len(), params.len());
            adam.step_count += 1;
            let t = adam.step_count as i32;
            let c1 = 1.0 - adam.beta1.powi(t);
            let c2 = 1.0 - adam.beta2.powi(t);
            for i in (0..params.len()).filter(|&i| mask[i]) {
                let g = grad[i];
                adam.m[i] = adam.beta1 * adam.m[i] + (1.0 - adam.beta1) * g;
                adam.v[i] = adam.beta2 * adam.v[i] + (1.0 - adam.beta2) * g * g;
                let m_hat = adam.m[i] / c1;
                let v_hat = adam.v[i] / c2;
                params[i] += lr * m_hat / (v_hat.sqrt() + adam.epsilon);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    /// Mean of the K black-box evaluations drawn this iteration.
    pub mean: f64,
    pub gain_half: f64,
    pub pen_center: f64,
    pub pen_binary: f64,
    pub pen_cat_width: f64,
    pub pen_group_sum: f64,
    /// Box the samples were drawn from (before this iteration's step).
    pub centers: Vec<f64>,
    pub half_lengths: Vec<f64>,
    /// Not part of the CSV format.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<QuadraticSurrogate>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
}

const FIXED_COLUMNS: [&str; 8] = [
    "iter",
    "objective",
    "mean",
    "gain_half",
    "pen_center",
    "pen_binary",
    "pen_cat_width",
    "pen_group_sum",
];

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn csv_header(d: usize) -> Vec<String> {
        FIXED_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain((0..d).map(|i| format!("c_{i}")))
            .chain((0..d).map(|i| format!("s_{i}")))
            .collect()
    }

    /// Writes the trajectory as CSV; floats use the shortest representation
    /// that round-trips.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.records.first().map_or(0, |r| r.centers.len());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::csv_header(d))?;
        for r in &self.records {
            let mut row = vec![r.iter.to_string()];
            row.extend(
                [
                    r.objective,
                    r.mean,
                    r.gain_half,
                    r.pen_center,
                    r.pen_binary,
                    r.pen_cat_width,
                    r.pen_group_sum,
                ]
                .iter()
                .chain(&r.centers)
                .chain(&r.half_lengths)
                .map(|v| v.to_string()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
        let mut records = rdr.records();
        let header = match records.next() {
            None => return Err(Error::Parse { line: 1, message: "no records".into() }),
            Some(h) => h?,
        };
        let cols = header.len();
        if cols < FIXED_COLUMNS.len() || !(cols - FIXED_COLUMNS.len()).is_multiple_of(2) {
            return Err(Error::Parse { line: 1, message: format!("unexpected header with {cols} columns") });
        }
        let d = (cols - FIXED_COLUMNS.len()) / 2;
        let expected = Self::csv_header(d);
        if header.iter().zip(&expected).any(|(a, b)| a != b) {
            return Err(Error::Parse { line: 1, message: "header does not match trajectory format".into() });
        }
        let mut out = Vec::new();
        for rec in records {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != cols {
                return Err(Error::Parse { line, message: format!("expected {cols} fields, got {}", rec.len()) });
            }
            let num = |k: usize| -> Result<f64> {
                rec[k].trim().parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("column {}: {e}", expected[k]),
                })
            };
            let iter = rec[0].trim().parse::<usize>().map_err(|e| Error::Parse { line, message: format!("iter: {e}") })?;
            out.push(IterationRecord {
                iter,
                objective: num(1)?,
                mean: num(2)?,
                gain_half: num(3)?,
                pen_center: num(4)?,
                pen_binary: num(5)?,
                pen_cat_width: num(6)?,
                pen_group_sum: num(7)?,
                centers: (0..d).map(|i| num(8 + i)).collect::<Result<_>>()?,
                half_lengths: (0..d).map(|i| num(8 + d + i)).collect::<Result<_>>()?,
                surrogate: None,
            });
        }
        if out.is_empty() {
            return Err(Error::Parse { line: 2, message: "no records".into() });
        }
        Ok(Self { records: out })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub domain: BoxDomain,
    pub trajectory: Trajectory,
}

/// Random start: free centers uniform in [-0.5, 0.5], free half-lengths 0.5,
/// constrained dims at their configured values.
pub fn random_init(schema: &FeatureSchema, seed: u64, sigma_min: f64) -> Result<BoxDomain> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = schema.dim();
    let centers = (0..d).map(|_| rng.gen_range(-0.5..=0.5)).collect();
    let domain = BoxDomain::new(centers, vec![0.5; d])?;
    apply_constraints(&domain, schema, sigma_min)
}

/// Monte Carlo mean of `f` over the box with `n` fresh samples; returns
/// `(mean, standard error)`.
pub fn monte_carlo_mean(
    f: &dyn BlackBox,
    domain: &BoxDomain,
    schema: &FeatureSchema,
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = sample_box(domain, schema, n, &mut rng);
    let ys = evaluate_all(f, xs)?.outputs;
    let mean = ys.iter().sum::<f64>() / n as f64;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

fn evaluate_all(f: &dyn BlackBox, inputs: Vec<Vec<f64>>) -> Result<SampleBatch> {
    let mut outputs = Vec::with_capacity(inputs.len());
    for x in &inputs {
        let y = f.eval(x);
        if !y.is_finite() {
            return Err(Error::NonFinite { input: x.clone(), value: y });
        }
        outputs.push(y);
    }
    Ok(SampleBatch { inputs, outputs })
}

pub fn run(
    f: &dyn BlackBox,
    schema: &FeatureSchema,
    init: &BoxDomain,
    cfg: &OptimizerConfig,
    w: &PenaltyWeights,
    mode: ObjectiveMode,
) -> Result<RunOutput> {
    cfg.validate()?;
    w.validate()?;
    schema.validate()?;
    let d = schema.dim();
    if f.dim() != d {
        return Err(Error::Schema(format!("black box takes {} inputs, schema has {d}", f.dim())));
    }
    if let ObjectiveMode::TargetMean(m) = mode {
        if !m.is_finite() {
            return Err(Error::Config("target mean must be finite".into()));
        }
    }
    let mut domain = apply_constraints(init, schema, cfg.sigma_min)?;
    domain.validate()?;

    let p = coefficient_count(d);
    if cfg.sample_count < p {
        warn!(
            "{} samples per iteration for {p} surrogate coefficients; the fit relies on ridge = {}",
            cfg.sample_count, cfg.ridge
        );
    }

    let free = free_mask(schema);
    let mask: Vec<bool> = free.iter().chain(&free).copied().collect();
    let mut adam = match cfg.optimizer_kind {
        OptimizerKind::GradientAscent => None,
        OptimizerKind::Adam { beta1, beta2, epsilon } => Some(AdamState::new(2 * d, beta1, beta2, epsilon)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut params = vec![0.0; 2 * d];

    for iter in 1..=cfg.iterations {
        let inputs = sample_box(&domain, schema, cfg.sample_count, &mut rng);
        let batch = evaluate_all(f, inputs)?;
        let surrogate = fit(&batch, cfg.ridge)?;
        let report: ObjectiveReport = evaluate(&surrogate, &domain, schema, w, mode)?;
        debug!("iter {iter}: objective {:.6} mean {:.6}", report.value, batch.mean_output());
        records.push(IterationRecord {
            iter,
            objective: report.value,
            mean: batch.mean_output(),
            gain_half: report.gain_half,
            pen_center: report.pen_center,
            pen_binary: report.pen_binary,
            pen_cat_width: report.pen_cat_width,
            pen_group_sum: report.pen_group_sum,
            centers: domain.centers.clone(),
            half_lengths: domain.half_lengths.clone(),
            surrogate: Some(surrogate),
        });

        params[..d].copy_from_slice(&domain.centers);
        params[d..].copy_from_slice(&domain.half_lengths);
        let grad: Vec<f64> = report.grad_center.iter().chain(&report.grad_half).copied().collect();
        ascend_step(&mut params, &grad, adam.as_mut(), cfg.learning_rate, &mask);

        domain.centers.copy_from_slice(&params[..d]);
        for (i, s) in domain.half_lengths.iter_mut().enumerate() {
            *s = if free[i] { params[d + i].max(cfg.sigma_min) } else { params[d + i] };
        }
        domain = apply_constraints(&domain, schema, cfg.sigma_min)?;
        domain
            .validate()
            .map_err(|e| Error::Domain(format!("iteration {iter} produced an invalid box: {e}")))?;
    }

    Ok(RunOutput {
        domain,
        trajectory: Trajectory { records },
    })
}
