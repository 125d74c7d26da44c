//! Least-squares fits: OLS, ridge and lasso.

use nalgebra::{DMatrix, DVector};

use super::{FitFlag, LinearModel, RegressError, Standardizer};
use crate::telemetry::Dataset;

const RIDGE_FALLBACK_LAMBDA: f64 = 1e-8;
const LASSO_TOL: f64 = 1e-7;
const LASSO_MAX_SWEEPS: usize = 10_000;

/// Ordinary least squares with an intercept, solved through an orthogonal
/// decomposition. A rank-deficient (or underdetermined) design matrix falls
/// through to ridge with a tiny penalty and flags the model.
pub fn fit_ols(d: &Dataset) -> Result<LinearModel, RegressError> {
    let n = d.n_rows();
    let p = d.n_features();
    if n == 0 || p == 0 {
        return Err(RegressError::EmptyInput);
    }
    if n < p + 1 {
        let mut m = ridge_solve(d, RIDGE_FALLBACK_LAMBDA)?;
        m.flag = Some(FitFlag::RankDeficient);
        return Ok(m);
    }

    let mut x = DMatrix::zeros(n, p + 1);
    for (i, row) in d.rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[(i, j)] = v;
        }
        x[(i, p)] = 1.0;
    }
    let y = DVector::from_column_slice(&d.target);

    let svd = x.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let eps = max_sv * 1e-12 * (n.max(p + 1) as f64);
    if svd.rank(eps) < p + 1 {
        let mut m = ridge_solve(d, RIDGE_FALLBACK_LAMBDA)?;
        m.flag = Some(FitFlag::RankDeficient);
        return Ok(m);
    }
    let sol = svd.solve(&y, eps).map_err(|_| RegressError::BadParam("singular system"))?;
    let weights: Vec<f64> = sol.as_slice()[..p].to_vec();
    let intercept = sol[p];
    Ok(LinearModel { weights, intercept, standardizer: Standardizer::Identity, flag: None })
}

/// Ridge regression: squared error plus `lambda * ||w||^2`, intercept
/// unpenalized. Stands in for Bayesian regression with a fixed Gaussian
/// prior.
pub fn fit_ridge(d: &Dataset, lambda: f64) -> Result<LinearModel, RegressError> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(RegressError::BadParam("lambda must be finite and >= 0"));
    }
    ridge_solve(d, lambda)
}

fn ridge_solve(d: &Dataset, lambda: f64) -> Result<LinearModel, RegressError> {
    let n = d.n_rows();
    let p = d.n_features();
    if n == 0 || p == 0 {
        return Err(RegressError::EmptyInput);
    }
    let x_mean: Vec<f64> =
        (0..p).map(|j| d.rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let y_mean = d.target.iter().sum::<f64>() / n as f64;

    // Centered augmented least squares: [Xc; sqrt(lambda) I] w = [yc; 0].
    let mut a = DMatrix::zeros(n + p, p);
    for (i, row) in d.rows.iter().enumerate() {
        for j in 0..p {
            a[(i, j)] = row[j] - x_mean[j];
        }
    }
    let sqrt_l = lambda.sqrt();
    for j in 0..p {
        a[(n + j, j)] = sqrt_l;
    }
    let mut b = DVector::zeros(n + p);
    for i in 0..n {
        b[i] = d.target[i] - y_mean;
    }

    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let eps = if max_sv > 0.0 { max_sv * 1e-12 * ((n + p) as f64) } else { 1e-300 };
    let sol = svd.solve(&b, eps).map_err(|_| RegressError::BadParam("singular system"))?;
    let weights: Vec<f64> = sol.as_slice().to_vec();
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel { weights, intercept, standardizer: Standardizer::Identity, flag: None })
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Lasso by cyclic coordinate descent on standardized columns, minimizing
/// `(1/2n) * SSE + lambda * ||w||_1`. Converged when the largest coordinate
/// change in a sweep drops below `1e-7`; otherwise the best iterate is
/// returned flagged.
pub fn fit_lasso(d: &Dataset, lambda: f64) -> Result<LinearModel, RegressError> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(RegressError::BadParam("lambda must be finite and >= 0"));
    }
    let n = d.n_rows();
    let p = d.n_features();
    if n == 0 || p == 0 {
        return Err(RegressError::EmptyInput);
    }
    let standardizer = Standardizer::fit(&d.rows);
    let z = standardizer.transform(&d.rows);
    let y_mean = d.target.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = d.target.iter().map(|v| v - y_mean).collect();

    // Per-column second moment (1/n) <z_j, z_j>; 1.0 for standardized
    // columns, 0.0 for constant ones (their weight stays 0).
    let col_sq: Vec<f64> =
        (0..p).map(|j| z.iter().map(|r| r[j] * r[j]).sum::<f64>() / n as f64).collect();

    let mut w = vec![0.0f64; p];
    let mut resid = yc.clone();
    let mut flag = Some(FitFlag::NotConverged);
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let dot: f64 = z.iter().zip(&resid).map(|(r, &e)| r[j] * e).sum::<f64>() / n as f64;
            let rho = dot + col_sq[j] * w[j];
            let w_new = soft_threshold(rho, lambda) / col_sq[j];
            let delta = w_new - w[j];
            if delta != 0.0 {
                for (r, e) in z.iter().zip(resid.iter_mut()) {
                    *e -= r[j] * delta;
                }
                w[j] = w_new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        if max_delta < LASSO_TOL {
            flag = None;
            break;
        }
    }
    Ok(LinearModel { weights: w, intercept: y_mean, standardizer, flag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::Model;
    use crate::telemetry::Dataset;

    fn dataset(rows: Vec<Vec<f64>>, target: Vec<f64>) -> Dataset {
        let p = rows[0].len();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        Dataset::from_parts("t", names, rows, target, vec![])
    }

    #[test]
    fn ols_recovers_exact_line() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let target: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
        let m = fit_ols(&dataset(rows, target)).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-9);
        assert!(m.intercept.abs() < 1e-9);
        assert!(m.flag.is_none());
    }

    #[test]
    fn ols_constant_target() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let m = fit_ols(&dataset(rows, vec![7.5; 8])).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-9));
        assert!((m.intercept - 7.5).abs() < 1e-9);
    }

    #[test]
    fn ols_recovers_two_features() {
        let rows: Vec<Vec<f64>> = (0..15)
            .map(|i| vec![(i % 5) as f64, ((i * 7) % 11) as f64])
            .collect();
        let target: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - r[1] + 5.0).collect();
        let m = fit_ols(&dataset(rows, target)).unwrap();
        assert!((m.weights[0] - 3.0).abs() < 1e-8);
        assert!((m.weights[1] + 1.0).abs() < 1e-8);
        assert!((m.intercept - 5.0).abs() < 1e-8);
    }

    #[test]
    fn ols_rank_deficient_falls_back_to_ridge() {
        // Second column duplicates the first.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let target: Vec<f64> = rows.iter().map(|r| 4.0 * r[0] + 1.0).collect();
        let m = fit_ols(&dataset(rows.clone(), target.clone())).unwrap();
        assert_eq!(m.flag, Some(FitFlag::RankDeficient));
        for (row, want) in rows.iter().zip(&target) {
            assert!((m.predict_row(row) - want).abs() < 1e-3);
        }
    }

    #[test]
    fn ols_underdetermined_flags() {
        let rows = vec![vec![1.0, 2.0, 3.0]];
        let m = fit_ols(&dataset(rows, vec![1.0])).unwrap();
        assert_eq!(m.flag, Some(FitFlag::RankDeficient));
    }

    #[test]
    fn ols_residuals_orthogonal_to_columns() {
        // Standardized features; residual must be orthogonal to each column
        // and to the all-ones column.
        let raw: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64).sin() * 3.0, (i % 7) as f64, (i * i % 13) as f64])
            .collect();
        let s = Standardizer::fit(&raw);
        let rows = s.transform(&raw);
        let target: Vec<f64> =
            rows.iter().enumerate().map(|(i, r)| r[0] - 2.0 * r[2] + (i % 3) as f64).collect();
        let d = dataset(rows.clone(), target.clone());
        let m = fit_ols(&d).unwrap();
        let resid: Vec<f64> =
            rows.iter().zip(&target).map(|(r, y)| y - m.predict_row(r)).collect();
        for j in 0..3 {
            let dot: f64 = rows.iter().zip(&resid).map(|(r, e)| r[j] * e).sum();
            assert!(dot.abs() < 1e-6, "column {j} dot {dot}");
        }
        let ones: f64 = resid.iter().sum();
        assert!(ones.abs() < 1e-6);
    }

    #[test]
    fn ridge_zero_lambda_matches_ols() {
        let rows: Vec<Vec<f64>> =
            (0..12).map(|i| vec![i as f64, ((i * 3) % 7) as f64]).collect();
        let target: Vec<f64> = rows.iter().map(|r| 1.5 * r[0] + 0.5 * r[1] - 2.0).collect();
        let d = dataset(rows, target);
        let ols = fit_ols(&d).unwrap();
        let ridge = fit_ridge(&d, 0.0).unwrap();
        for (a, b) in ols.weights.iter().zip(&ridge.weights) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!((ols.intercept - ridge.intercept).abs() < 1e-6);
    }

    #[test]
    fn ridge_two_point_closed_form() {
        // Points (0,0), (2,2); centered solve gives w = 2/(2+1) = 2/3 and
        // intercept 1 - (2/3)*1 = 1/3.
        let d = dataset(vec![vec![0.0], vec![2.0]], vec![0.0, 2.0]);
        let m = fit_ridge(&d, 1.0).unwrap();
        assert!((m.weights[0] - 2.0 / 3.0).abs() < 1e-10);
        assert!((m.intercept - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn ridge_large_lambda_shrinks_to_mean() {
        let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64]).collect();
        let target: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        let mean = target.iter().sum::<f64>() / target.len() as f64;
        let m = fit_ridge(&dataset(rows, target), 1e12).unwrap();
        assert!(m.weights[0].abs() < 1e-6);
        assert!((m.intercept - mean).abs() < 1e-6);
    }

    #[test]
    fn lasso_zero_lambda_matches_ols_predictions() {
        let rows: Vec<Vec<f64>> =
            (0..14).map(|i| vec![i as f64, ((i * 5) % 9) as f64]).collect();
        let target: Vec<f64> = rows.iter().map(|r| 0.7 * r[0] - 1.2 * r[1] + 3.0).collect();
        let d = dataset(rows.clone(), target);
        let ols = fit_ols(&d).unwrap();
        let lasso = fit_lasso(&d, 0.0).unwrap();
        for row in &rows {
            assert!((ols.predict_row(row) - lasso.predict_row(row)).abs() < 1e-5);
        }
    }

    #[test]
    fn lasso_large_lambda_zeroes_weights() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (10 - i) as f64]).collect();
        let target: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let mean = target.iter().sum::<f64>() / target.len() as f64;
        let m = fit_lasso(&dataset(rows, target), 1e6).unwrap();
        assert!(m.weights.iter().all(|w| *w == 0.0));
        assert!((m.intercept - mean).abs() < 1e-12);
    }

    #[test]
    fn lasso_univariate_closed_form() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let ys = [0.3, 1.9, 4.4, 5.8, 8.1, 10.2, 12.3, 13.6];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let d = dataset(rows.clone(), ys.to_vec());
        let lambda = 0.5;
        let m = fit_lasso(&d, lambda).unwrap();

        let s = Standardizer::fit(&rows);
        let z: Vec<f64> = s.transform(&rows).iter().map(|r| r[0]).collect();
        let y_mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let n = ys.len() as f64;
        let dot = z.iter().zip(&ys).map(|(zi, yi)| zi * (yi - y_mean)).sum::<f64>() / n;
        let zz = z.iter().map(|zi| zi * zi).sum::<f64>() / n;
        let want = super::soft_threshold(dot, lambda) / zz;
        assert!((m.weights[0] - want).abs() < 1e-7, "{} vs {want}", m.weights[0]);
    }

    #[test]
    fn lasso_l1_norm_monotone_in_lambda() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64, ((i * 3) % 11) as f64, ((i * i) % 7) as f64])
            .collect();
        let target: Vec<f64> =
            rows.iter().map(|r| 1.0 * r[0] - 0.4 * r[1] + 0.1 * r[2] + 2.0).collect();
        let d = dataset(rows, target);
        let lambdas = [0.0, 0.1, 0.5, 1.0, 5.0, 50.0];
        let norms: Vec<f64> = lambdas
            .iter()
            .map(|&l| fit_lasso(&d, l).unwrap().weights.iter().map(|w| w.abs()).sum::<f64>())
            .collect();
        for pair in norms.windows(2) {
            assert!(pair[0] >= pair[1] - 1e-9, "{norms:?}");
        }
    }
}
