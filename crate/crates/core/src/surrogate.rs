//! Degree-2 polynomial surrogate fitted by ridge regression on points drawn
//! uniformly from the current box.
//!
//! Coefficient order, shared by [`design_matrix`] and
//! [`QuadraticSurrogate::coefficients`]: intercept, the `D` linear terms, then
//! `x_i x_j` for `i <= j` in lexicographic order.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{BoxDomain, Constraint, FeatureSchema};
use crate::error::{Error, Result};

/// Number of coefficients of a full quadratic in `d` variables.
pub fn coefficient_count(d: usize) -> usize {
    1 + d + d * (d + 1) / 2
}

/// Position of `b_ij` (`i <= j`) inside the packed quadratic table.
#[inline]
fn packed_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < d);
    i * (2 * d + 1 - i) / 2 + (j - i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSurrogate {
    pub constant: f64,
    pub linear: Vec<f64>,
    /// `b_ij` for `i <= j`, packed row by row.
    pub quad: Vec<f64>,
}

impl QuadraticSurrogate {
    pub fn zero(d: usize) -> Self {
        Self {
            constant: 0.0,
            linear: vec![0.0; d],
            quad: vec![0.0; d * (d + 1) / 2],
        }
    }

    /// Rebuilds a surrogate from a coefficient vector in design-matrix order.
    pub fn from_coefficients(d: usize, w: &[f64]) -> Result<Self> {
        if w.len() != coefficient_count(d) {
            return Err(Error::Domain(format!(
                "expected {} coefficients for {d} dims, got {}",
                coefficient_count(d),
                w.len()
            )));
        }
        Ok(Self {
            constant: w[0],
            linear: w[1..=d].to_vec(),
            quad: w[d + 1..].to_vec(),
        })
    }

    pub fn coefficients(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(coefficient_count(self.dim()));
        w.push(self.constant);
        w.extend_from_slice(&self.linear);
        w.extend_from_slice(&self.quad);
        w
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    /// `b_ij`, read symmetrically.
    pub fn quad_coef(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.quad[packed_index(self.dim(), i, j)]
    }

    pub fn set_quad_coef(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let d = self.dim();
        self.quad[packed_index(d, i, j)] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite()
            && self.linear.iter().all(|v| v.is_finite())
            && self.quad.iter().all(|v| v.is_finite())
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut y = self.constant;
        let mut k = 0;
        for i in 0..d {
            y += self.linear[i] * x[i];
            for j in i..d {
                y += self.quad[k] * x[i] * x[j];
                k += 1;
            }
        }
        y
    }

    /// Same polynomial with every coefficient negated.
    pub fn negated(&self) -> Self {
        Self {
            constant: -self.constant,
            linear: self.linear.iter().map(|v| -v).collect(),
            quad: self.quad.iter().map(|v| -v).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn mean_output(&self) -> f64 {
        self.outputs.iter().sum::<f64>() / self.outputs.len() as f64
    }
}

/// Draws `k` points uniformly from the box. `FixedValue` dims are returned as
/// exactly their value.
pub fn sample_box<R: Rng + ?Sized>(
    domain: &BoxDomain,
    schema: &FeatureSchema,
    k: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let d = domain.dim();
    (0..k)
        .map(|_| {
            (0..d)
                .map(|j| match schema.dims.get(j).map(|s| s.constraint) {
                    Some(Constraint::FixedValue(v)) => v,
                    _ => {
                        let (lo, hi) = (domain.lower(j), domain.upper(j));
                        let u: f64 = rng.gen();
                        (lo + (hi - lo) * u).clamp(lo, hi)
                    }
                })
                .collect()
        })
        .collect()
}

fn write_design_row(x: &[f64], row: &mut [f64]) {
    let d = x.len();
    row[0] = 1.0;
    row[1..=d].copy_from_slice(x);
    let mut k = d + 1;
    for i in 0..d {
        for j in i..d {
            row[k] = x[i] * x[j];
            k += 1;
        }
    }
}

/// Expands each input row into `[1, x_1..x_D, x_i x_j (i <= j)]`.
pub fn design_matrix(inputs: &[Vec<f64>]) -> DMatrix<f64> {
    let d = inputs.first().map_or(0, Vec::len);
    let p = coefficient_count(d);
    let mut x = DMatrix::zeros(inputs.len(), p);
    let mut row = vec![0.0; p];
    for (r, input) in inputs.iter().enumerate() {
        write_design_row(input, &mut row);
        for (c, v) in row.iter().enumerate() {
            x[(r, c)] = *v;
        }
    }
    x
}

/// Ridge least squares over the quadratic design matrix; the intercept is not
/// penalized.
///
/// Solved as the stacked system `[X; sqrt(ridge) I'] w = [y; 0]` by Householder
/// QR, which has the same minimizer as the ridge normal equations.
pub fn fit(batch: &SampleBatch, ridge: f64) -> Result<QuadraticSurrogate> {
    let k = batch.len();
    if k != batch.outputs.len() {
        return Err(Error::Domain(format!(
            "{k} inputs but {} outputs",
            batch.outputs.len()
        )));
    }
    if k < 2 {
        return Err(Error::Domain("at least two samples are needed to fit".into()));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Config(format!("ridge must be >= 0, got {ridge}")));
    }
    let d = batch.inputs[0].len();
    let p = coefficient_count(d);
    if ridge == 0.0 && k < p {
        return Err(Error::SingularFit {
            samples: k,
            coefficients: p,
        });
    }

    let extra = if ridge > 0.0 { p - 1 } else { 0 };
    let rows = k + extra;
    let mut a = DMatrix::zeros(rows, p);
    let mut b = DVector::zeros(rows);
    let mut row = vec![0.0; p];
    for (r, (input, &y)) in batch.inputs.iter().zip(&batch.outputs).enumerate() {
        if input.len() != d {
            return Err(Error::Domain(format!("sample {r} has {} dims, expected {d}", input.len())));
        }
        write_design_row(input, &mut row);
        for (c, v) in row.iter().enumerate() {
            a[(r, c)] = *v;
        }
        b[r] = y;
    }
    if ridge > 0.0 {
        let shrink = ridge.sqrt();
        for c in 1..p {
            a[(k + c - 1, c)] = shrink;
        }
    }

    let qr = a.qr();
    let r = qr.r();
    // Only the unregularized system can be rank deficient.
    let scale = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rank_tol = scale * 1e-12 * rows as f64;
    if ridge == 0.0 && r.diagonal().iter().any(|v| v.abs() <= rank_tol) {
        return Err(Error::SingularFit {
            samples: k,
            coefficients: p,
        });
    }
    let qtb = qr.q().transpose() * b;
    let w = r.solve_upper_triangular(&qtb).ok_or(Error::SingularFit {
        samples: k,
        coefficients: p,
    })?;
    let surrogate = QuadraticSurrogate::from_coefficients(d, w.as_slice())?;
    if !surrogate.is_finite() {
        return Err(Error::SingularFit {
            samples: k,
            coefficients: p,
        });
    }
    Ok(surrogate)
}
