//! Baseline regression models, RMSE scoring and k-fold cross-validation.
//!
//! The zoo covers ordinary least squares, ridge (a fixed-Gaussian-prior
//! stand-in for Bayesian regression), lasso, per-sample SGD and a small MLP.
//! Tree ensembles live in [`crate::gbt`]; both plug into the same
//! cross-validation harness through the [`Model`] trait.

mod cv;
mod linear;
mod mlp;
mod sgd;

pub use cv::{compare_models, kfold_cv, CvReport, ModelSpec, Trainer};
pub use linear::{fit_lasso, fit_ols, fit_ridge};
pub use mlp::{fit_mlp, mlp_loss_and_grad, MlpModel, MlpParams, HIDDEN_UNITS};
pub use sgd::fit_sgd;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegressError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {needed} rows, got {rows}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("cannot split {rows} rows into {k} folds")]
    BadFold { rows: usize, k: usize },
    #[error("{what} diverged (loss exceeded {limit:e})")]
    Divergence { what: &'static str, limit: f64 },
    #[error("invalid parameter: {0}")]
    BadParam(&'static str),
}

/// Anything that maps a feature row to a scalar prediction.
pub trait Model {
    fn predict_row(&self, x: &[f64]) -> f64;

    fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}

/// Root mean squared error of predictions against observations.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64, RegressError> {
    if y.len() != y_hat.len() {
        return Err(RegressError::LengthMismatch { left: y.len(), right: y_hat.len() });
    }
    if y.is_empty() {
        return Err(RegressError::EmptyInput);
    }
    let sum_sq: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum_sq / y.len() as f64).sqrt())
}

/// Per-column feature scaling applied before prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Standardizer {
    Identity,
    /// Per-column (mean, stddev); population stddev, constant columns pinned
    /// to stddev 1 so they map to zero.
    ZScore(Vec<(f64, f64)>),
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Standardizer {
        let n = rows.len();
        if n == 0 {
            return Standardizer::Identity;
        }
        let d = rows[0].len();
        let mut stats = Vec::with_capacity(d);
        for j in 0..d {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            stats.push((mean, if std > 0.0 { std } else { 1.0 }));
        }
        Standardizer::ZScore(stats)
    }

    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Standardizer::Identity => x.to_vec(),
            Standardizer::ZScore(stats) => {
                x.iter().zip(stats).map(|(v, (m, s))| (v - m) / s).collect()
            }
        }
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Condition noted while fitting; carried on the model rather than failing
/// the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitFlag {
    /// Design matrix was rank deficient; solved as ridge with a tiny penalty.
    RankDeficient,
    /// Iteration limit reached before the convergence tolerance.
    NotConverged,
}

/// A linear predictor with optional input standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub standardizer: Standardizer,
    pub flag: Option<FitFlag>,
}

impl Model for LinearModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.transform_row(x);
        self.intercept + self.weights.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>()
    }
}
