//! Linear regression by per-sample stochastic gradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LinearModel, RegressError, Standardizer};
use crate::telemetry::Dataset;

const DIVERGENCE_LIMIT: f64 = 1e12;

/// Squared-loss SGD over standardized columns, one gradient step per sample,
/// reshuffled each epoch with the seeded generator. Deterministic for a
/// fixed seed.
pub fn fit_sgd(
    d: &Dataset,
    lr: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearModel, RegressError> {
    if !lr.is_finite() || lr <= 0.0 {
        return Err(RegressError::BadParam("learning rate must be positive"));
    }
    let n = d.n_rows();
    let p = d.n_features();
    if n == 0 || p == 0 {
        return Err(RegressError::EmptyInput);
    }
    let standardizer = Standardizer::fit(&d.rows);
    let z = standardizer.transform(&d.rows);

    let mut weights = vec![0.0f64; p];
    let mut intercept = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for &i in &order {
            let row = &z[i];
            let pred =
                intercept + weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>();
            let err = pred - d.target[i];
            epoch_loss += err * err;
            for (w, v) in weights.iter_mut().zip(row) {
                *w -= lr * err * v;
            }
            intercept -= lr * err;
        }
        if !epoch_loss.is_finite() || epoch_loss > DIVERGENCE_LIMIT {
            return Err(RegressError::Divergence { what: "sgd", limit: DIVERGENCE_LIMIT });
        }
    }
    Ok(LinearModel { weights, intercept, standardizer, flag: None })
}
