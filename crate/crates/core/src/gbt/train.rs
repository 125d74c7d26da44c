//! Additive training loop and exact greedy tree growing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DefaultSide, GbtError, GbtHyper, TreeEnsemble, TreeNode};
use crate::telemetry::Dataset;

/// Train a boosted ensemble on squared-error loss.
///
/// Per round the gradients are `prediction - target` with unit hessians;
/// each tree is grown by exact greedy split search and predictions advance
/// by `eta` times the new tree. With `subsample < 1` the row set for each
/// round is drawn with the seeded generator, so training is deterministic
/// for a fixed seed.
pub fn train(d: &Dataset, hyper: &GbtHyper, seed: u64) -> Result<TreeEnsemble, GbtError> {
    hyper.validate()?;
    let n = d.n_rows();
    if n < 2 {
        return Err(GbtError::TooFewRows { rows: n, needed: 2 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Optional early-stopping holdout: 10% of rows, at least one, seeded.
    let (train_idx, holdout_idx): (Vec<usize>, Vec<usize>) = match hyper.early_stop_patience {
        Some(_) if n >= 10 => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let cut = (n / 10).max(1);
            let mut hold = order[..cut].to_vec();
            let mut train = order[cut..].to_vec();
            hold.sort_unstable();
            train.sort_unstable();
            (train, hold)
        }
        _ => ((0..n).collect(), Vec::new()),
    };

    let base_score =
        train_idx.iter().map(|&i| d.target[i]).sum::<f64>() / train_idx.len() as f64;
    let mut preds = vec![base_score; n];
    let mut trees: Vec<TreeNode> = Vec::new();

    let mut best_holdout = f64::INFINITY;
    let mut best_len = 0usize;
    let mut since_best = 0usize;

    let n_sub = ((train_idx.len() as f64) * hyper.subsample).ceil().max(1.0) as usize;
    for _ in 0..hyper.rounds {
        let members: Vec<usize> = if n_sub < train_idx.len() {
            let mut pool = train_idx.clone();
            pool.shuffle(&mut rng);
            let mut chosen = pool[..n_sub].to_vec();
            chosen.sort_unstable();
            chosen
        } else {
            train_idx.clone()
        };
        let grads: Vec<f64> = (0..n).map(|i| preds[i] - d.target[i]).collect();
        let tree = grow(d, &grads, &members, 0, hyper);
        for (p, row) in preds.iter_mut().zip(&d.rows) {
            *p += hyper.eta * tree.eval(row);
        }
        trees.push(tree);

        if let Some(patience) = hyper.early_stop_patience {
            if !holdout_idx.is_empty() {
                let sse: f64 = holdout_idx
                    .iter()
                    .map(|&i| (preds[i] - d.target[i]).powi(2))
                    .sum();
                let rmse = (sse / holdout_idx.len() as f64).sqrt();
                if rmse < best_holdout {
                    best_holdout = rmse;
                    best_len = trees.len();
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= patience {
                        trees.truncate(best_len);
                        break;
                    }
                }
            }
        }
    }

    Ok(TreeEnsemble {
        trees,
        base_score,
        hyper: hyper.clone(),
        feature_names: d.feature_names.clone(),
        target_bounds: d.target_bounds(),
    })
}

/// Grow a node over `members` (row indices in ascending order). Gradient and
/// hessian sums for the node itself are always recomputed from the member
/// list in index order, so leaf weights are reproducible by replaying the
/// routing.
fn grow(d: &Dataset, grads: &[f64], members: &[usize], depth: usize, hyper: &GbtHyper) -> TreeNode {
    let g: f64 = members.iter().map(|&i| grads[i]).sum();
    let h = members.len() as f64;
    let leaf = || TreeNode::Leaf { weight: -g / (h + hyper.lambda) };

    if depth >= hyper.max_depth || members.len() < 2 {
        return leaf();
    }
    let Some((feature_index, threshold)) = best_split(d, grads, members, g, h, hyper) else {
        return leaf();
    };

    let (left_members, right_members): (Vec<usize>, Vec<usize>) =
        members.iter().partition(|&&i| d.rows[i][feature_index] < threshold);

    TreeNode::Internal {
        feature_index,
        threshold,
        default_side: DefaultSide::Right,
        left: Box::new(grow(d, grads, &left_members, depth + 1, hyper)),
        right: Box::new(grow(d, grads, &right_members, depth + 1, hyper)),
    }
}

/// Exact greedy search over all (feature, threshold) candidates. Thresholds
/// are midpoints between consecutive distinct values; a candidate is valid
/// when both sides carry at least `min_child_weight` hessian. Returns the
/// first candidate attaining the maximum positive gain, scanning features
/// and thresholds in ascending order.
fn best_split(
    d: &Dataset,
    grads: &[f64],
    members: &[usize],
    g_total: f64,
    h_total: f64,
    hyper: &GbtHyper,
) -> Option<(usize, f64)> {
    let lambda = hyper.lambda;
    let parent_score = g_total * g_total / (h_total + lambda);
    let mut best: Option<(usize, f64)> = None;
    let mut best_gain = 0.0f64;

    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(members.len());
    for feature_index in 0..d.n_features() {
        sorted.clear();
        sorted.extend(members.iter().map(|&i| (d.rows[i][feature_index], grads[i])));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted[0].0 == sorted[sorted.len() - 1].0 {
            continue;
        }

        let mut g_left = 0.0f64;
        let mut h_left = 0.0f64;
        for w in 0..sorted.len() - 1 {
            g_left += sorted[w].1;
            h_left += 1.0;
            let (v, next_v) = (sorted[w].0, sorted[w + 1].0);
            if v == next_v {
                continue;
            }
            let h_right = h_total - h_left;
            if h_left < hyper.min_child_weight || h_right < hyper.min_child_weight {
                continue;
            }
            let g_right = g_total - g_left;
            let gain = 0.5
                * (g_left * g_left / (h_left + lambda) + g_right * g_right / (h_right + lambda)
                    - parent_score)
                - hyper.gamma;
            if gain > best_gain {
                let mut t = v + (next_v - v) / 2.0;
                if t <= v {
                    t = next_v;
                }
                best_gain = gain;
                best = Some((feature_index, t));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::rmse;
    use rand::Rng;

    fn dataset(rows: Vec<Vec<f64>>, target: Vec<f64>) -> Dataset {
        let p = rows[0].len();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        Dataset::from_parts("t", names, rows, target, vec![])
    }

    fn stump_hyper() -> GbtHyper {
        GbtHyper {
            eta: 1.0,
            gamma: 0.0,
            lambda: 1.0,
            max_depth: 1,
            min_child_weight: 1.0,
            subsample: 1.0,
            rounds: 1,
            early_stop_patience: None,
        }
    }

    #[test]
    fn zero_rounds_predicts_mean() {
        let d = dataset(vec![vec![0.0], vec![1.0], vec![2.0]], vec![1.0, 2.0, 6.0]);
        let m = train(&d, &GbtHyper { rounds: 0, ..GbtHyper::default() }, 0).unwrap();
        assert!(m.trees.is_empty());
        for row in &d.rows {
            assert_eq!(m.predict(row).unwrap(), 3.0);
        }
    }

    #[test]
    fn two_point_hand_example() {
        // base 5, residual gradients +-5, leaf weights -G/(H+lambda) = +-2.5.
        let d = dataset(vec![vec![0.0], vec![1.0]], vec![0.0, 10.0]);
        let m = train(&d, &stump_hyper(), 0).unwrap();
        assert_eq!(m.base_score, 5.0);
        assert_eq!(m.trees.len(), 1);
        assert!((m.predict(&[0.0]).unwrap() - 2.5).abs() < 1e-12);
        assert!((m.predict(&[1.0]).unwrap() - 7.5).abs() < 1e-12);
    }

    #[test]
    fn huge_gamma_degenerates_to_base() {
        let rows: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let target: Vec<f64> = rows.iter().map(|r| r[0] * 2.0).collect();
        let d = dataset(rows, target);
        let hyper = GbtHyper { gamma: 1e12, rounds: 5, ..GbtHyper::default() };
        let m = train(&d, &hyper, 0).unwrap();
        let base = m.base_score;
        for row in &d.rows {
            assert_eq!(m.predict(row).unwrap(), base);
        }
    }

    #[test]
    fn invalid_hyper_is_rejected() {
        let d = dataset(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0]);
        let bad = GbtHyper { max_depth: 0, ..GbtHyper::default() };
        assert!(matches!(train(&d, &bad, 0), Err(GbtError::BadHyper(_))));
        assert!(matches!(
            train(&d.subset(&[0]), &GbtHyper::default(), 0),
            Err(GbtError::TooFewRows { .. })
        ));
    }

    #[test]
    fn additivity_over_tree_prefixes() {
        let rows: Vec<Vec<f64>> =
            (0..32).map(|i| vec![(i % 8) as f64, (i / 8) as f64]).collect();
        let target: Vec<f64> = rows.iter().map(|r| r[0] * r[1] + r[0]).collect();
        let d = dataset(rows.clone(), target);
        let hyper = GbtHyper { rounds: 12, min_child_weight: 1.0, ..GbtHyper::default() };
        let m = train(&d, &hyper, 3).unwrap();
        for x in rows.iter().take(5) {
            let mut acc = m.base_score;
            for k in 0..m.trees.len() {
                acc += m.hyper.eta * m.trees[k].eval(x);
                let prefix = TreeEnsemble {
                    trees: m.trees[..=k].to_vec(),
                    base_score: m.base_score,
                    hyper: m.hyper.clone(),
                    feature_names: m.feature_names.clone(),
                    target_bounds: m.target_bounds,
                };
                assert_eq!(prefix.predict(x).unwrap(), acc);
            }
        }
    }

    #[test]
    fn training_rmse_nonincreasing_with_full_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let rows: Vec<Vec<f64>> =
            (0..64).map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)]).collect();
        let target: Vec<f64> =
            rows.iter().map(|r| (r[0] - 5.0).abs() * 3.0 + r[1]).collect();
        let d = dataset(rows.clone(), target.clone());
        let hyper = GbtHyper { rounds: 30, min_child_weight: 2.0, ..GbtHyper::default() };
        let m = train(&d, &hyper, 1).unwrap();

        let mut preds = vec![m.base_score; d.n_rows()];
        let mut last = rmse(&target, &preds).unwrap();
        for tree in &m.trees {
            for (p, row) in preds.iter_mut().zip(&rows) {
                *p += m.hyper.eta * tree.eval(row);
            }
            let now = rmse(&target, &preds).unwrap();
            assert!(now <= last + 1e-12, "{now} > {last}");
            last = now;
        }
    }

    #[test]
    fn min_child_weight_bounds_leaf_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.gen_range(0.0..1.0)]).collect();
        let target: Vec<f64> = rows.iter().map(|r| r[0] * 10.0).collect();
        let d = dataset(rows.clone(), target);
        let hyper = GbtHyper { rounds: 5, ..GbtHyper::default() }; // mcw = 4
        let m = train(&d, &hyper, 2).unwrap();
        for tree in &m.trees {
            let mut leaf_counts: std::collections::HashMap<usize, usize> =
                std::collections::HashMap::new();
            for row in &rows {
                let mut node = tree;
                let mut id = 0usize;
                loop {
                    match node {
                        TreeNode::Leaf { .. } => break,
                        TreeNode::Internal { feature_index, threshold, left, right, .. } => {
                            if row[*feature_index] < *threshold {
                                node = left;
                                id = id * 2 + 1;
                            } else {
                                node = right;
                                id = id * 2 + 2;
                            }
                        }
                    }
                }
                *leaf_counts.entry(id).or_insert(0) += 1;
            }
            for (_, count) in leaf_counts {
                assert!(count >= 4, "leaf with only {count} rows");
            }
        }
    }

    #[test]
    fn leaf_weights_follow_the_replayed_gradient_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> =
            (0..16).map(|_| vec![rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)]).collect();
        let target: Vec<f64> = rows.iter().map(|r| r[0] * 2.0 - r[1] + 1.0).collect();
        let d = dataset(rows.clone(), target.clone());
        let hyper =
            GbtHyper { rounds: 8, min_child_weight: 2.0, lambda: 1.0, ..GbtHyper::default() };
        let m = train(&d, &hyper, 7).unwrap();

        let mut preds = vec![m.base_score; d.n_rows()];
        for tree in &m.trees {
            let grads: Vec<f64> = preds.iter().zip(&target).map(|(p, y)| p - y).collect();
            let mut leaves: std::collections::BTreeMap<usize, (f64, f64, f64)> =
                std::collections::BTreeMap::new();
            for (i, row) in rows.iter().enumerate() {
                let mut node = tree;
                let mut id = 0usize;
                let weight = loop {
                    match node {
                        TreeNode::Leaf { weight } => break *weight,
                        TreeNode::Internal { feature_index, threshold, left, right, .. } => {
                            if row[*feature_index] < *threshold {
                                node = left;
                                id = id * 2 + 1;
                            } else {
                                node = right;
                                id = id * 2 + 2;
                            }
                        }
                    }
                };
                let entry = leaves.entry(id).or_insert((0.0, 0.0, weight));
                entry.0 += grads[i];
                entry.1 += 1.0;
            }
            for (_, (g, h, w)) in leaves {
                assert_eq!(w, -g / (h + hyper.lambda));
            }
            for (p, row) in preds.iter_mut().zip(&rows) {
                *p += hyper.eta * tree.eval(row);
            }
        }
    }

    #[test]
    fn deterministic_under_seed_with_subsampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.gen_range(0.0..1.0)]).collect();
        let target: Vec<f64> = rows.iter().map(|r| r[0].sin()).collect();
        let d = dataset(rows, target);
        let hyper = GbtHyper {
            subsample: 0.6,
            rounds: 10,
            min_child_weight: 1.0,
            ..GbtHyper::default()
        };
        let a = train(&d, &hyper, 99).unwrap();
        let b = train(&d, &hyper, 99).unwrap();
        assert_eq!(a, b);
        let c = train(&d, &hyper, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn early_stopping_caps_tree_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.gen_range(0.0..1.0)]).collect();
        // Pure noise: the holdout stops improving quickly.
        let target: Vec<f64> = (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = dataset(rows, target);
        let hyper = GbtHyper {
            rounds: 200,
            min_child_weight: 1.0,
            early_stop_patience: Some(5),
            ..GbtHyper::default()
        };
        let m = train(&d, &hyper, 4).unwrap();
        assert!(m.trees.len() < 200, "expected an early stop, got {}", m.trees.len());
    }

    /// Brute-force best single-split stump: minimizes SSE with per-side mean
    /// predictions. Mirrors a depth-1 tree with eta=1, gamma=0, lambda=0.
    fn brute_force_stump_sse(rows: &[Vec<f64>], y: &[f64]) -> f64 {
        let n = y.len();
        let mean = y.iter().sum::<f64>() / n as f64;
        let mut best: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        for j in 0..rows[0].len() {
            let mut vals: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = w[0] + (w[1] - w[0]) / 2.0;
                let t = if t > w[0] { t } else { w[1] };
                let (mut sl, mut nl, mut sr, mut nr) = (0.0, 0usize, 0.0, 0usize);
                for (r, &yi) in rows.iter().zip(y) {
                    if r[j] < t {
                        sl += yi;
                        nl += 1;
                    } else {
                        sr += yi;
                        nr += 1;
                    }
                }
                if nl == 0 || nr == 0 {
                    continue;
                }
                let (ml, mr) = (sl / nl as f64, sr / nr as f64);
                let sse: f64 = rows
                    .iter()
                    .zip(y)
                    .map(|(r, &yi)| {
                        let m = if r[j] < t { ml } else { mr };
                        (yi - m).powi(2)
                    })
                    .sum();
                if sse < best {
                    best = sse;
                }
            }
        }
        best
    }

    #[test]
    fn depth_one_tree_matches_brute_force_stump() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let n = rng.gen_range(4..40);
            let p = rng.gen_range(1..4);
            let rows: Vec<Vec<f64>> =
                (0..n).map(|_| (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let d = dataset(rows.clone(), y.clone());
            let hyper = GbtHyper { lambda: 0.0, ..stump_hyper() };
            let m = train(&d, &hyper, 0).unwrap();
            let sse: f64 = rows
                .iter()
                .zip(&y)
                .map(|(r, &yi)| (m.predict(r).unwrap() - yi).powi(2))
                .sum();
            let want = brute_force_stump_sse(&rows, &y);
            assert!((sse - want).abs() < 1e-9, "sse {sse} vs brute force {want}");
        }
    }

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
}
