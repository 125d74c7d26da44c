//! Hyperparameter grid search and the feature-count threshold curve.

use super::{train, GbtError, GbtHyper};
use crate::regress::{kfold_cv, CvReport, Model, RegressError};
use crate::telemetry::Dataset;

/// Candidate values per hyperparameter. Empty lists fall back to the
/// default value, so a partially specified grid searches only the listed
/// dimensions.
#[derive(Debug, Clone, Default)]
pub struct GbtGrid {
    pub eta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub min_child_weight: Vec<f64>,
    pub subsample: Vec<f64>,
    pub rounds: Vec<usize>,
}

fn or_default<T: Clone + PartialOrd>(list: &[T], default: T) -> Vec<T> {
    if list.is_empty() {
        return vec![default];
    }
    let mut v = list.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v.dedup_by(|a, b| a == b);
    v
}

/// Exhaustive search over the Cartesian product of the grid, scored by
/// k-fold CV mean RMSE. Cells are enumerated in ascending lexicographic
/// parameter order (eta, gamma, lambda, max_depth, min_child_weight,
/// subsample, rounds) and ties keep the earliest cell.
pub fn grid_search(
    d: &Dataset,
    grid: &GbtGrid,
    k: usize,
    seed: u64,
) -> Result<(GbtHyper, CvReport), GbtError> {
    let defaults = GbtHyper::default();
    let etas = or_default(&grid.eta, defaults.eta);
    let gammas = or_default(&grid.gamma, defaults.gamma);
    let lambdas = or_default(&grid.lambda, defaults.lambda);
    let depths = or_default(&grid.max_depth, defaults.max_depth);
    let mcws = or_default(&grid.min_child_weight, defaults.min_child_weight);
    let subsamples = or_default(&grid.subsample, defaults.subsample);
    let rounds = or_default(&grid.rounds, defaults.rounds);

    let mut best: Option<(GbtHyper, CvReport)> = None;
    for &eta in &etas {
        for &gamma in &gammas {
            for &lambda in &lambdas {
                for &max_depth in &depths {
                    for &min_child_weight in &mcws {
                        for &subsample in &subsamples {
                            for &r in &rounds {
                                let hyper = GbtHyper {
                                    eta,
                                    gamma,
                                    lambda,
                                    max_depth,
                                    min_child_weight,
                                    subsample,
                                    rounds: r,
                                    early_stop_patience: defaults.early_stop_patience,
                                };
                                let report = cv_gbt(d, &hyper, k, seed)?;
                                let better = match &best {
                                    None => true,
                                    Some((_, b)) => report.mean_rmse < b.mean_rmse,
                                };
                                if better {
                                    best = Some((hyper, report));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    best.ok_or(GbtError::BadHyper("empty grid"))
}

fn cv_gbt(d: &Dataset, hyper: &GbtHyper, k: usize, seed: u64) -> Result<CvReport, GbtError> {
    let trainer = |sub: &Dataset| -> Result<Box<dyn Model>, RegressError> {
        train(sub, hyper, seed)
            .map(|m| Box::new(m) as Box<dyn Model>)
            .map_err(|e| RegressError::BadParam(match e {
                GbtError::BadHyper(msg) => msg,
                _ => "gbt training failed",
            }))
    };
    Ok(kfold_cv(d, k, "gbt", &trainer, seed)?)
}

/// RMSE as a function of feature count: train and cross-validate on the top
/// `n` features for every `n`, where `ranked_features` is ordered by
/// importance descending.
pub fn threshold_curve(
    d: &Dataset,
    ranked_features: &[String],
    hyper: &GbtHyper,
    k: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>, GbtError> {
    let mut columns = Vec::with_capacity(ranked_features.len());
    for name in ranked_features {
        let idx = d
            .feature_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| GbtError::UnknownFeature(name.clone()))?;
        columns.push(idx);
    }
    let mut curve = Vec::with_capacity(columns.len());
    for n in 1..=columns.len() {
        let sub = d.select_columns(&columns[..n]);
        let report = cv_gbt(&sub, hyper, k, seed)?;
        curve.push((n, report.mean_rmse));
    }
    Ok(curve)
}
