//! k-fold cross-validation and model comparison.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{rmse, Model, RegressError};
use crate::telemetry::Dataset;

/// Cross-validation outcome for one model configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub model_name: String,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
    pub k: usize,
}

/// A model-fitting procedure usable by the cross-validation harness.
pub type Trainer<'a> = dyn Fn(&Dataset) -> Result<Box<dyn Model>, RegressError> + 'a;

/// A named model-fitting procedure fed to [`compare_models`].
pub struct ModelSpec<'a> {
    pub name: String,
    pub trainer: Box<Trainer<'a>>,
}

impl<'a> ModelSpec<'a> {
    pub fn new(
        name: impl Into<String>,
        trainer: impl Fn(&Dataset) -> Result<Box<dyn Model>, RegressError> + 'a,
    ) -> Self {
        ModelSpec { name: name.into(), trainer: Box::new(trainer) }
    }
}

/// Shuffled fold index sets: rows are permuted once with the seeded
/// generator and split into `k` folds whose sizes differ by at most one.
pub fn fold_indices(n_rows: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, RegressError> {
    if k < 2 || n_rows < k {
        return Err(RegressError::BadFold { rows: n_rows, k });
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n_rows / k;
    let extra = n_rows % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        folds.push(order[at..at + size].to_vec());
        at += size;
    }
    Ok(folds)
}

/// k-fold cross-validation: each fold serves once as the validation set for
/// a model trained on the remaining folds.
pub fn kfold_cv(
    d: &Dataset,
    k: usize,
    model_name: &str,
    trainer: &Trainer<'_>,
    seed: u64,
) -> Result<CvReport, RegressError> {
    let folds = fold_indices(d.n_rows(), k, seed)?;
    let mut fold_rmse = Vec::with_capacity(k);
    for valid in &folds {
        let train_idx: Vec<usize> =
            folds.iter().flatten().copied().filter(|i| !valid.contains(i)).collect();
        let model = trainer(&d.subset(&train_idx))?;
        let rows: Vec<Vec<f64>> = valid.iter().map(|&i| d.rows[i].clone()).collect();
        let truth: Vec<f64> = valid.iter().map(|&i| d.target[i]).collect();
        fold_rmse.push(rmse(&truth, &model.predict(&rows))?);
    }
    let mean_rmse = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
    Ok(CvReport { model_name: model_name.to_string(), fold_rmse, mean_rmse, k })
}

/// Cross-validate every spec on identical folds and return reports sorted by
/// mean RMSE ascending, ties broken by model name.
pub fn compare_models(
    d: &Dataset,
    specs: &[ModelSpec<'_>],
    k: usize,
    seed: u64,
) -> Result<Vec<CvReport>, RegressError> {
    if specs.is_empty() {
        return Err(RegressError::EmptyInput);
    }
    let mut reports = Vec::with_capacity(specs.len());
    for spec in specs {
        reports.push(kfold_cv(d, k, &spec.name, spec.trainer.as_ref(), seed)?);
    }
    reports.sort_by(|a, b| {
        a.mean_rmse
            .total_cmp(&b.mean_rmse)
            .then_with(|| a.model_name.cmp(&b.model_name))
    });
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::fit_ols;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn dataset(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let target: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        Dataset::from_parts("t", vec!["x".into()], rows, target, vec![])
    }

    fn ols_trainer(d: &Dataset) -> Result<Box<dyn Model>, RegressError> {
        Ok(Box::new(fit_ols(d)?))
    }

    #[test]
    fn fold_sizes_differ_by_at_most_one() {
        let folds = fold_indices(13, 10, 0).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 1, 1, 1, 1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn leave_one_out_edge() {
        let folds = fold_indices(6, 6, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 1));
    }

    #[test]
    fn too_few_rows_errors() {
        assert!(matches!(fold_indices(3, 10, 0), Err(RegressError::BadFold { .. })));
        assert!(matches!(fold_indices(10, 1, 0), Err(RegressError::BadFold { .. })));
    }

    proptest! {
        #[test]
        fn folds_partition_rows_exactly(n in 2usize..200, k in 2usize..12, seed in 0u64..50) {
            prop_assume!(n >= k);
            let folds = fold_indices(n, k, seed).unwrap();
            let mut seen = BTreeSet::new();
            for fold in &folds {
                for &i in fold {
                    prop_assert!(seen.insert(i), "duplicate index {i}");
                }
            }
            prop_assert_eq!(seen.len(), n);
        }
    }

    #[test]
    fn constant_target_scores_zero() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64]).collect();
        let d = Dataset::from_parts("t", vec!["x".into()], rows, vec![4.2; 12], vec![]);
        let rep = kfold_cv(&d, 4, "ols", &ols_trainer, 9).unwrap();
        assert!(rep.fold_rmse.iter().all(|r| *r < 1e-9), "{:?}", rep.fold_rmse);
    }

    #[test]
    fn mean_is_arithmetic_mean() {
        let rep = kfold_cv(&dataset(20), 5, "ols", &ols_trainer, 2).unwrap();
        let mean = rep.fold_rmse.iter().sum::<f64>() / 5.0;
        assert_eq!(rep.mean_rmse, mean);
        assert_eq!(rep.k, 5);
    }

    #[test]
    fn compare_orders_and_breaks_ties_by_name() {
        let d = dataset(20);
        let specs = vec![
            ModelSpec::new("b_ols", ols_trainer),
            ModelSpec::new("a_ols", ols_trainer),
        ];
        let reports = compare_models(&d, &specs, 5, 7).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].mean_rmse, reports[1].mean_rmse);
        assert_eq!(reports[0].model_name, "a_ols");
    }

    #[test]
    fn single_spec_single_report() {
        let reports =
            compare_models(&dataset(10), &[ModelSpec::new("ols", ols_trainer)], 5, 1).unwrap();
        assert_eq!(reports.len(), 1);
    }
}
