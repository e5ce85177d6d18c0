//! One-hidden-layer perceptron for binary classification: rectifier hidden
//! units, logistic output, trained on binary cross-entropy with mini-batch Adam.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_data, BlackBox};
use crate::error::Result;

/// Outputs are kept strictly inside (0, 1) even when the logistic saturates.
const PROB_EPS: f64 = f64::EPSILON / 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `weights[out][in]`
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for ((o, row), b) in out.iter_mut().zip(&self.weights).zip(&self.biases) {
            *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_units: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_units: 16,
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 32,
            seed: 0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl MlpModel {
    fn random(d: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let init = |fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
            let limit = (6.0 / fan_in as f64).sqrt();
            DenseLayer {
                weights: (0..fan_out)
                    .map(|_| (0..fan_in).map(|_| rng.gen_range(-limit..limit)).collect())
                    .collect(),
                biases: vec![0.0; fan_out],
            }
        };
        let hidden_layer = init(d, hidden, rng);
        let output_layer = init(hidden, 1, rng);
        Self {
            layer_sizes: vec![d, hidden, 1],
            hidden: hidden_layer,
            output: output_layer,
        }
    }

    /// Pre-activation of the output unit; hidden activations land in `h`.
    fn logit(&self, x: &[f64], h: &mut [f64]) -> f64 {
        self.hidden.forward(x, h);
        for v in h.iter_mut() {
            *v = v.max(0.0);
        }
        let mut z = [0.0];
        self.output.forward(h, &mut z);
        z[0]
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut h = vec![0.0; self.hidden.biases.len()];
        sigmoid(self.logit(x, &mut h)).clamp(PROB_EPS, 1.0 - PROB_EPS)
    }
}

impl BlackBox for MlpModel {
    fn dim(&self) -> usize {
        self.layer_sizes[0]
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.predict(x)
    }
}

/// Flat Adam moments for every parameter of the network.
struct AdamBuffers {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamBuffers {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step<'a>(&mut self, lr: f64, params: impl Iterator<Item = (&'a mut f64, f64)>) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for (k, (p, g)) in params.enumerate() {
            self.m[k] = B1 * self.m[k] + (1.0 - B1) * g;
            self.v[k] = B2 * self.v[k] + (1.0 - B2) * g * g;
            *p -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + EPS);
        }
    }
}

pub fn mlp_train(features: &[Vec<f64>], labels: &[u8], cfg: &MlpConfig) -> Result<MlpModel> {
    let d = check_training_data(features, labels)?;
    let hu = cfg.hidden_units.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::random(d, hu, &mut rng);
    let n_params = hu * d + hu + hu + 1;
    let mut adam = AdamBuffers::new(n_params);

    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut h = vec![0.0; hu];
    let mut g_w1 = vec![vec![0.0; d]; hu];
    let mut g_b1 = vec![0.0; hu];
    let mut g_w2 = vec![0.0; hu];
    let mut g_b2;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            g_w1.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 0.0));
            g_b1.iter_mut().for_each(|v| *v = 0.0);
            g_w2.iter_mut().for_each(|v| *v = 0.0);
            g_b2 = 0.0;
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let x = &features[i];
                let p = sigmoid(model.logit(x, &mut h));
                let dz = (p - labels[i] as f64) * scale;
                g_b2 += dz;
                for u in 0..hu {
                    g_w2[u] += dz * h[u];
                    if h[u] > 0.0 {
                        let dh = dz * model.output.weights[0][u];
                        g_b1[u] += dh;
                        for (g, v) in g_w1[u].iter_mut().zip(x) {
                            *g += dh * v;
                        }
                    }
                }
            }
            let params = model
                .hidden
                .weights
                .iter_mut()
                .flatten()
                .zip(g_w1.iter().flatten().copied())
                .chain(model.hidden.biases.iter_mut().zip(g_b1.iter().copied()))
                .chain(model.output.weights[0].iter_mut().zip(g_w2.iter().copied()))
                .chain(std::iter::once((&mut model.output.biases[0], g_b2)));
            adam.step(cfg.learning_rate, params);
        }
    }
    Ok(model)
}
