//! Gradient-boosted regression trees with a regularized split objective.
//!
//! Trees are grown by exact greedy split enumeration over sorted feature
//! values. A split is taken only when the regularized gain
//! `0.5 * (GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)) - gamma`
//! is positive, and leaf weights are `-G/(H+lambda)`. With squared-error
//! loss the per-round gradients are `prediction - target` and all hessians
//! are one, so hessian sums double as row counts.

mod search;
mod train;

pub use search::{grid_search, threshold_curve, GbtGrid};
pub use train::train;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regress::{Model, RegressError};

#[derive(Debug, Error)]
pub enum GbtError {
    #[error("dataset is empty or has too few rows ({rows}); need at least {needed}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("invalid hyperparameter: {0}")]
    BadHyper(&'static str),
    #[error("feature vector has {got} entries, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error(transparent)]
    Cv(#[from] RegressError),
}

/// Which child receives a missing value. Ingestion rejects non-finite
/// features, so this exists for format compatibility and defaults to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefaultSide {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        default_side: DefaultSide,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        weight: f64,
    },
}

impl TreeNode {
    /// Route a row to its leaf weight; `x[feature] < threshold` goes left,
    /// ties go right.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Internal { feature_index, threshold, default_side, left, right } => {
                    let v = x[*feature_index];
                    node = if v.is_nan() {
                        match default_side {
                            DefaultSide::Left => left,
                            DefaultSide::Right => right,
                        }
                    } else if v < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn n_internal(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.n_internal() + right.n_internal(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn count_features(&self, counts: &mut [usize]) {
        if let TreeNode::Internal { feature_index, left, right, .. } = self {
            counts[*feature_index] += 1;
            left.count_features(counts);
            right.count_features(counts);
        }
    }
}

/// Training hyperparameters. Defaults are the tuned values: gamma 0.5,
/// learning rate 0.1, depth 4, minimum child weight 4, subsample 1, with
/// leaf L2 at its conventional default of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtHyper {
    pub eta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub rounds: usize,
    /// When set, holds out 10% of rows (seeded) and stops after this many
    /// rounds without holdout improvement, keeping the best prefix.
    pub early_stop_patience: Option<usize>,
}

impl Default for GbtHyper {
    fn default() -> Self {
        GbtHyper {
            eta: 0.1,
            gamma: 0.5,
            lambda: 1.0,
            max_depth: 4,
            min_child_weight: 4.0,
            subsample: 1.0,
            rounds: 100,
            early_stop_patience: None,
        }
    }
}

impl GbtHyper {
    pub fn validate(&self) -> Result<(), GbtError> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(GbtError::BadHyper("eta must be positive"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(GbtError::BadHyper("gamma must be >= 0"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(GbtError::BadHyper("lambda must be >= 0"));
        }
        if self.max_depth < 1 {
            return Err(GbtError::BadHyper("max_depth must be >= 1"));
        }
        if !(self.min_child_weight.is_finite() && self.min_child_weight >= 0.0) {
            return Err(GbtError::BadHyper("min_child_weight must be >= 0"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(GbtError::BadHyper("subsample must be in (0, 1]"));
        }
        Ok(())
    }
}

/// A trained boosted forest. The prediction for a row is
/// `base_score + eta * sum(tree(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<TreeNode>,
    pub base_score: f64,
    pub hyper: GbtHyper,
    pub feature_names: Vec<String>,
    /// (min, max) of the training target; drives the prediction guard.
    pub target_bounds: (f64, f64),
}

impl TreeEnsemble {
    pub fn predict(&self, x: &[f64]) -> Result<f64, GbtError> {
        if x.len() != self.feature_names.len() {
            return Err(GbtError::DimensionMismatch {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        // Accumulated one round at a time, mirroring the training loop, so
        // predictions match training-time values bit for bit.
        let mut acc = self.base_score;
        for t in &self.trees {
            acc += self.hyper.eta * t.eval(x);
        }
        acc
    }
}

impl Model for TreeEnsemble {
    fn predict_row(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.feature_names.len(), "feature dimension mismatch");
        self.predict_unchecked(x)
    }
}

/// Per-feature tally of internal-node occurrences across the ensemble.
/// Features never used are present with count zero.
pub fn feature_importance(m: &TreeEnsemble) -> BTreeMap<String, usize> {
    let mut counts = vec![0usize; m.feature_names.len()];
    for tree in &m.trees {
        tree.count_features(&mut counts);
    }
    m.feature_names.iter().cloned().zip(counts).collect()
}

/// Features sorted by importance descending, ties by name.
pub fn ranked_features(m: &TreeEnsemble) -> Vec<String> {
    let imp = feature_importance(m);
    let mut items: Vec<(String, usize)> = imp.into_iter().collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items.into_iter().map(|(name, _)| name).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(w: f64) -> TreeNode {
        TreeNode::Leaf { weight: w }
    }

    fn ensemble(trees: Vec<TreeNode>, names: &[&str]) -> TreeEnsemble {
        TreeEnsemble {
            trees,
            base_score: 50.0,
            hyper: GbtHyper { eta: 0.1, ..GbtHyper::default() },
            feature_names: names.iter().map(|s| s.to_string()).collect(),
            target_bounds: (0.0, 100.0),
        }
    }

    #[test]
    fn empty_ensemble_predicts_base() {
        let m = ensemble(vec![], &["a"]);
        assert_eq!(m.predict(&[1.0]).unwrap(), 50.0);
    }

    #[test]
    fn single_leaf_scales_by_eta() {
        let m = ensemble(vec![leaf(3.0)], &["a"]);
        assert!((m.predict(&[0.0]).unwrap() - 50.3).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let m = ensemble(vec![], &["a", "b"]);
        assert!(matches!(
            m.predict(&[1.0]),
            Err(GbtError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn routing_ties_go_right() {
        let tree = TreeNode::Internal {
            feature_index: 0,
            threshold: 1.0,
            default_side: DefaultSide::Right,
            left: Box::new(leaf(-1.0)),
            right: Box::new(leaf(1.0)),
        };
        assert_eq!(tree.eval(&[0.999]), -1.0);
        assert_eq!(tree.eval(&[1.0]), 1.0);
        assert_eq!(tree.eval(&[f64::NAN]), 1.0);
    }

    #[test]
    fn importance_counts_internal_nodes() {
        let split = TreeNode::Internal {
            feature_index: 1,
            threshold: 0.0,
            default_side: DefaultSide::Right,
            left: Box::new(leaf(0.0)),
            right: Box::new(leaf(1.0)),
        };
        let m = ensemble(vec![split, leaf(2.0)], &["a", "b", "c"]);
        let imp = feature_importance(&m);
        assert_eq!(imp["a"], 0);
        assert_eq!(imp["b"], 1);
        assert_eq!(imp["c"], 0);
        let total: usize = imp.values().sum();
        let internal: usize = m.trees.iter().map(TreeNode::n_internal).sum();
        assert_eq!(total, internal);
    }

    #[test]
    fn importance_empty_ensemble_all_zero() {
        let m = ensemble(vec![], &["a", "b"]);
        assert!(feature_importance(&m).values().all(|c| *c == 0));
    }
}
