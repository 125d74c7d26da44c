//! A single-hidden-layer perceptron trained by full-batch gradient descent.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Model, RegressError, Standardizer};
use crate::telemetry::Dataset;

/// One hidden layer of five rectifier units.
pub const HIDDEN_UNITS: usize = 5;

const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// Hidden weights, `HIDDEN_UNITS x n_features`.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpParams {
    /// Seeded uniform(-0.5, 0.5) init in a fixed parameter order.
    pub fn init(n_features: usize, seed: u64) -> MlpParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || rng.gen_range(-0.5..0.5);
        let w1 = (0..HIDDEN_UNITS)
            .map(|_| (0..n_features).map(|_| draw()).collect())
            .collect();
        let b1 = (0..HIDDEN_UNITS).map(|_| draw()).collect();
        let w2 = (0..HIDDEN_UNITS).map(|_| draw()).collect();
        let b2 = draw();
        MlpParams { w1, b1, w2, b2 }
    }

    pub fn n_features(&self) -> usize {
        self.w1[0].len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for row in &self.w1 {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
        out
    }

    pub fn from_flat(n_features: usize, flat: &[f64]) -> MlpParams {
        assert_eq!(flat.len(), HIDDEN_UNITS * n_features + 2 * HIDDEN_UNITS + 1);
        let mut it = flat.iter().copied();
        let w1 = (0..HIDDEN_UNITS)
            .map(|_| (0..n_features).map(|_| it.next().unwrap()).collect())
            .collect();
        let b1 = (0..HIDDEN_UNITS).map(|_| it.next().unwrap()).collect();
        let w2 = (0..HIDDEN_UNITS).map(|_| it.next().unwrap()).collect();
        let b2 = it.next().unwrap();
        MlpParams { w1, b1, w2, b2 }
    }

    fn forward(&self, z: &[f64]) -> f64 {
        let mut out = self.b2;
        for u in 0..HIDDEN_UNITS {
            let a = self.b1[u]
                + self.w1[u].iter().zip(z).map(|(w, v)| w * v).sum::<f64>();
            if a > 0.0 {
                out += self.w2[u] * a;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    pub standardizer: Standardizer,
}

impl Model for MlpModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        self.params.forward(&self.standardizer.transform_row(x))
    }
}

/// Mean squared-error loss `1/(2n) * sum((yhat - y)^2)` and its gradient,
/// over already-standardized rows.
pub fn mlp_loss_and_grad(
    params: &MlpParams,
    rows: &[Vec<f64>],
    y: &[f64],
) -> (f64, MlpParams) {
    let n = rows.len();
    let d = params.n_features();
    let mut grad = MlpParams {
        w1: vec![vec![0.0; d]; HIDDEN_UNITS],
        b1: vec![0.0; HIDDEN_UNITS],
        w2: vec![0.0; HIDDEN_UNITS],
        b2: 0.0,
    };
    let mut loss = 0.0f64;
    let inv_n = 1.0 / n as f64;
    let mut acts = [0.0f64; HIDDEN_UNITS];
    for (row, &yi) in rows.iter().zip(y) {
        let mut pred = params.b2;
        for (u, act) in acts.iter_mut().enumerate() {
            let a = params.b1[u]
                + params.w1[u].iter().zip(row).map(|(w, v)| w * v).sum::<f64>();
            *act = a;
            if a > 0.0 {
                pred += params.w2[u] * a;
            }
        }
        let err = pred - yi;
        loss += 0.5 * err * err * inv_n;
        let dpred = err * inv_n;
        grad.b2 += dpred;
        for (u, &a) in acts.iter().enumerate() {
            if a > 0.0 {
                grad.w2[u] += dpred * a;
                let da = dpred * params.w2[u];
                grad.b1[u] += da;
                for (g, v) in grad.w1[u].iter_mut().zip(row) {
                    *g += da * v;
                }
            }
        }
    }
    (loss, grad)
}

/// Full-batch gradient descent on squared loss with seeded init.
/// Deterministic for a fixed seed.
pub fn fit_mlp(
    d: &Dataset,
    lr: f64,
    epochs: usize,
    seed: u64,
) -> Result<MlpModel, RegressError> {
    if !lr.is_finite() || lr <= 0.0 {
        return Err(RegressError::BadParam("learning rate must be positive"));
    }
    let n = d.n_rows();
    if n == 0 || d.n_features() == 0 {
        return Err(RegressError::EmptyInput);
    }
    let standardizer = Standardizer::fit(&d.rows);
    let z = standardizer.transform(&d.rows);
    let mut params = MlpParams::init(d.n_features(), seed);
    for _ in 0..epochs {
        let (loss, grad) = mlp_loss_and_grad(&params, &z, &d.target);
        if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
            return Err(RegressError::Divergence { what: "mlp", limit: DIVERGENCE_LIMIT });
        }
        for u in 0..HIDDEN_UNITS {
            for (w, g) in params.w1[u].iter_mut().zip(&grad.w1[u]) {
                *w -= lr * g;
            }
            params.b1[u] -= lr * grad.b1[u];
            params.w2[u] -= lr * grad.w2[u];
        }
        params.b2 -= lr * grad.b2;
    }
    Ok(MlpModel { params, standardizer })
}
