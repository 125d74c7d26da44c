//! `train`: fit one temperature model per host dataset, plus the per-fan
//! regressions the simulator needs, and cross-validate each fit.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use rackheat::gbt::{self, GbtHyper};
use rackheat::models::{ModelFile, ModelKind, MODEL_FORMAT_VERSION};
use rackheat::regress::{
    fit_lasso, fit_mlp, fit_ols, fit_ridge, fit_sgd, kfold_cv, Model, RegressError,
};
use rackheat::telemetry::{Dataset, FEATURE_NAMES, TARGET_NAME};
use rackheat::thermal::FanModels;

use super::{ensure_dir, ingest::load_datasets, write_json, write_run_config};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindArg {
    Gbt,
    Ols,
    Ridge,
    Lasso,
    Sgd,
    Mlp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainArgs {
    pub dataset_dir: PathBuf,
    pub out_dir: PathBuf,
    pub kind: ModelKindArg,
    pub gbt: GbtHyper,
    /// Penalty for ridge/lasso fits.
    pub lambda: f64,
    /// Learning rate for SGD/MLP fits.
    pub lr: f64,
    /// Epochs for SGD/MLP fits.
    pub epochs: usize,
    /// Cross-validation folds; 0 skips CV.
    pub cv_k: usize,
    pub seed: u64,
}

impl TrainArgs {
    pub fn new(dataset_dir: PathBuf, out_dir: PathBuf, kind: ModelKindArg, seed: u64) -> Self {
        TrainArgs {
            dataset_dir,
            out_dir,
            kind,
            gbt: GbtHyper::default(),
            lambda: 1.0,
            lr: 0.01,
            epochs: 200,
            cv_k: 0,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub kind: ModelKindArg,
    pub hosts: BTreeMap<String, HostTrain>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HostTrain {
    pub rows: usize,
    pub target_bounds: (f64, f64),
    /// CV error in target units (°C).
    pub cv_mean_rmse: Option<f64>,
    /// CV error with the target min-max normalized to [0, 1].
    pub cv_mean_rmse_normalized: Option<f64>,
    pub cv_fold_rmse: Vec<f64>,
}

fn fit_kind(d: &Dataset, args: &TrainArgs) -> Result<ModelKind> {
    Ok(match args.kind {
        ModelKindArg::Gbt => ModelKind::Gbt(gbt::train(d, &args.gbt, args.seed)?),
        ModelKindArg::Ols => ModelKind::Linear(fit_ols(d)?),
        ModelKindArg::Ridge => ModelKind::Linear(fit_ridge(d, args.lambda)?),
        ModelKindArg::Lasso => ModelKind::Linear(fit_lasso(d, args.lambda)?),
        ModelKindArg::Sgd => ModelKind::Linear(fit_sgd(d, args.lr, args.epochs, args.seed)?),
        ModelKindArg::Mlp => ModelKind::Mlp(fit_mlp(d, args.lr, args.epochs, args.seed)?),
    })
}

fn cv_trainer<'a>(
    args: &'a TrainArgs,
) -> impl Fn(&Dataset) -> Result<Box<dyn Model>, RegressError> + 'a {
    move |d: &Dataset| match fit_kind(d, args) {
        Ok(ModelKind::Gbt(m)) => Ok(Box::new(m) as Box<dyn Model>),
        Ok(ModelKind::Linear(m)) => Ok(Box::new(m) as Box<dyn Model>),
        Ok(ModelKind::Mlp(m)) => Ok(Box::new(m) as Box<dyn Model>),
        Err(_) => Err(RegressError::BadParam("training failed inside cross-validation")),
    }
}

/// Fit the four fan-speed regressions from the non-fan columns. Only
/// meaningful on datasets with the canonical column layout.
pub fn fit_fan_models(d: &Dataset) -> Result<Option<FanModels>> {
    if d.feature_names != FEATURE_NAMES {
        return Ok(None);
    }
    let non_fan: Vec<usize> = (0..9).collect();
    let mut models = Vec::with_capacity(4);
    let mut bounds = [(0.0f64, 0.0f64); 4];
    for (fan, bound) in bounds.iter_mut().enumerate() {
        let col = 9 + fan;
        let sub = Dataset::from_parts(
            d.host_id.clone(),
            non_fan.iter().map(|&c| d.feature_names[c].clone()).collect(),
            d.rows.iter().map(|r| non_fan.iter().map(|&c| r[c]).collect()).collect(),
            d.rows.iter().map(|r| r[col]).collect(),
            vec![],
        );
        models.push(fit_ols(&sub)?);
        *bound = d.bounds[col];
    }
    let models: [_; 4] = models.try_into().expect("exactly four fans");
    Ok(Some(FanModels { models, bounds }))
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let datasets = load_datasets(&args.dataset_dir)?;
    ensure_dir(&args.out_dir)?;

    let mut hosts = BTreeMap::new();
    for d in &datasets {
        let model = fit_kind(d, args)
            .with_context(|| format!("training {:?} model for {}", args.kind, d.host_id))?;
        let fan_models = fit_fan_models(d)?;
        let (cv_mean, cv_folds) = if args.cv_k >= 2 {
            let report = kfold_cv(d, args.cv_k, "model", &cv_trainer(args), args.seed)?;
            (Some(report.mean_rmse), report.fold_rmse)
        } else {
            (None, Vec::new())
        };
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            host_id: d.host_id.clone(),
            target: TARGET_NAME.to_string(),
            feature_names: d.feature_names.clone(),
            target_bounds: d.target_bounds(),
            model,
            fan_models,
        };
        file.save(&args.out_dir)?;
        let (t_lo, t_hi) = file.target_bounds;
        let span = t_hi - t_lo;
        hosts.insert(
            d.host_id.clone(),
            HostTrain {
                rows: d.n_rows(),
                target_bounds: file.target_bounds,
                cv_mean_rmse: cv_mean,
                cv_mean_rmse_normalized: cv_mean
                    .map(|r| if span > 0.0 { r / span } else { 0.0 }),
                cv_fold_rmse: cv_folds,
            },
        );
    }
    let summary = TrainSummary { kind: args.kind, hosts };
    write_json(&args.out_dir.join("train_summary.json"), &summary)?;
    write_run_config(&args.out_dir, "train", args)?;
    Ok(summary)
}
