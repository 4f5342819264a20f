//! Penalized least-squares baselines: LASSO and elastic net per equation.
//!
//! Each equation is fit by covariance-form coordinate descent on
//! `1/(2n) ||Y_j - a'X||^2 + lambda (l1 ||a||_1 + (1-l1)/2 ||a||^2)`,
//! warm-started along a descending penalty path. The penalty is chosen per
//! equation by forward-chaining cross-validation: folds always train on an
//! initial segment of the sample and validate on the block that follows it,
//! so no fold ever sees the future. Soft-thresholding produces exact zeros,
//! and the union of nonzero coefficients is the estimated graph.

use ndarray::{Array2, ArrayView2};
use std::ops::Range;

use crate::data::TimeSeriesData;
use crate::error::{EasError, Result};
use crate::graph::Graph;
use crate::model::TransitionMatrix;

/// Penalty path, mixing, and cross-validation settings.
#[derive(Debug, Clone)]
pub struct EnetConfig {
    /// Explicit penalty path, strictly descending, first entry positive; a
    /// trailing zero is allowed as a least-squares sentinel. `None` derives
    /// 50 log-spaced values over `[1e-3 lambda_max, lambda_max]` from the
    /// data, with `lambda_max = max_j ||X Y_j'||_inf / n`.
    pub lambda_grid: Option<Vec<f64>>,
    /// L1 share of the penalty in `(0, 1]`; `1` is the LASSO.
    pub l1_ratio: f64,
    pub cv_folds: usize,
    /// Stop a fit when no coefficient moves more than this in a sweep.
    pub tol: f64,
    /// Sweep cap per fit.
    pub max_iter: usize,
}

impl Default for EnetConfig {
    fn default() -> Self {
        EnetConfig {
            lambda_grid: None,
            l1_ratio: 0.5,
            cv_folds: 5,
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

impl EnetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l1_ratio > 0.0 && self.l1_ratio <= 1.0) {
            return Err(EasError::invalid(format!(
                "l1_ratio must lie in (0, 1], got {}",
                self.l1_ratio
            )));
        }
        if self.cv_folds == 0 {
            return Err(EasError::invalid("cv_folds must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(EasError::invalid("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(EasError::invalid("max_iter must be positive"));
        }
        if let Some(grid) = &self.lambda_grid {
            let ok = !grid.is_empty()
                && grid[0] > 0.0
                && grid.iter().all(|l| l.is_finite() && *l >= 0.0)
                && grid.windows(2).all(|w| w[0] > w[1]);
            if !ok {
                return Err(EasError::degenerate(
                    "lambda_grid must be finite, nonnegative, strictly \
                     descending, and start positive",
                ));
            }
        }
        Ok(())
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Covariance-form coordinate descent for one equation, warm-started from
/// `a`. `gram = X X'` and `xy = X Y_j'` over `n` samples. Returns the number
/// of sweeps used.
#[allow(clippy::too_many_arguments)]
fn coordinate_descent(
    gram: &ArrayView2<f64>,
    xy: &[f64],
    n: usize,
    lambda: f64,
    l1_ratio: f64,
    tol: f64,
    max_iter: usize,
    a: &mut [f64],
) -> usize {
    let n_f = n as f64;
    let p = a.len();
    let l1 = lambda * l1_ratio;
    let l2 = lambda * (1.0 - l1_ratio);
    let mut q = vec![0.0; p];
    for k in 0..p {
        if a[k] != 0.0 {
            for r in 0..p {
                q[r] += gram[[r, k]] * a[k];
            }
        }
    }
    for sweep in 1..=max_iter {
        let mut max_delta = 0.0f64;
        for k in 0..p {
            let gkk = gram[[k, k]];
            let old = a[k];
            // partial residual correlation with predictor k
            let rho = (xy[k] - q[k] + gkk * old) / n_f;
            let denom = gkk / n_f + l2;
            let new = if denom > 0.0 {
                soft_threshold(rho, l1) / denom
            } else {
                0.0
            };
            if new != old {
                let delta = new - old;
                for r in 0..p {
                    q[r] += gram[[r, k]] * delta;
                }
                a[k] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta <= tol {
            return sweep;
        }
    }
    max_iter
}

/// Elastic net coefficients for one equation at a fixed penalty, from a cold
/// start. Exposed for penalty-level diagnostics; the path fit in
/// [`enet_var`] warm-starts instead.
pub fn enet_equation(
    data: &TimeSeriesData,
    equation: usize,
    lambda: f64,
    l1_ratio: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if equation >= data.p() {
        return Err(EasError::invalid(format!(
            "equation {equation} out of range for p = {}",
            data.p()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(EasError::invalid("lambda must be nonnegative and finite"));
    }
    if !(l1_ratio > 0.0 && l1_ratio <= 1.0) {
        return Err(EasError::invalid("l1_ratio must lie in (0, 1]"));
    }
    let xy: Vec<f64> = data.xyt().column(equation).to_vec();
    let mut a = vec![0.0; data.p()];
    coordinate_descent(
        &data.xxt().view(),
        &xy,
        data.n(),
        lambda,
        l1_ratio,
        tol,
        max_iter,
        &mut a,
    );
    Ok(a)
}

/// Largest KKT violation of `a` for one equation's elastic-net problem.
/// Nonzero coefficients must satisfy their stationarity equation; zero
/// coefficients must have subgradient slack.
pub fn kkt_residual(
    data: &TimeSeriesData,
    equation: usize,
    a: &[f64],
    lambda: f64,
    l1_ratio: f64,
) -> Result<f64> {
    if equation >= data.p() || a.len() != data.p() {
        return Err(EasError::dim(format!(
            "kkt check expects {} coefficients for equation < {}",
            data.p(),
            data.p()
        )));
    }
    let n_f = data.n() as f64;
    let l1 = lambda * l1_ratio;
    let l2 = lambda * (1.0 - l1_ratio);
    let gram = data.xxt();
    let xy = data.xyt().column(equation);
    let mut worst = 0.0f64;
    for k in 0..data.p() {
        let mut ga = 0.0;
        for r in 0..data.p() {
            ga += gram[[k, r]] * a[r];
        }
        let grad = (ga - xy[k]) / n_f + l2 * a[k];
        let violation = if a[k] != 0.0 {
            (grad + l1 * a[k].signum()).abs()
        } else {
            (grad.abs() - l1).max(0.0)
        };
        worst = worst.max(violation);
    }
    Ok(worst)
}

/// Forward-chaining cross-validation folds over `n` time-ordered samples:
/// each fold trains on `[0, test.start)` and validates on `test`. The last
/// fold's block ends at `n`.
pub fn forward_chaining_folds(n: usize, folds: usize) -> Result<Vec<Range<usize>>> {
    if folds == 0 {
        return Err(EasError::invalid("cv_folds must be positive"));
    }
    let test_size = n / (folds + 1);
    if test_size == 0 {
        return Err(EasError::invalid(format!(
            "n = {n} too small for {folds} forward-chaining folds"
        )));
    }
    Ok((0..folds)
        .map(|i| {
            let end = n - (folds - 1 - i) * test_size;
            end - test_size..end
        })
        .collect())
}

fn auto_grid(lambda_max: f64) -> Vec<f64> {
    let count = 50;
    (0..count)
        .map(|i| lambda_max * 10f64.powf(-3.0 * i as f64 / (count - 1) as f64))
        .collect()
}

/// Cross-validated elastic net over all equations: the coefficient matrix
/// and its support. The penalty is selected independently per equation.
pub fn enet_var(data: &TimeSeriesData, cfg: &EnetConfig) -> Result<(TransitionMatrix, Graph)> {
    cfg.validate()?;
    let p = data.p();
    let n = data.n();
    if n < cfg.cv_folds + 1 {
        return Err(EasError::invalid(format!(
            "n = {n} too small for {} forward-chaining folds",
            cfg.cv_folds
        )));
    }
    let grid = match &cfg.lambda_grid {
        Some(g) => g.clone(),
        None => {
            let mut lambda_max = 0.0f64;
            for j in 0..p {
                for k in 0..p {
                    lambda_max = lambda_max.max(data.xyt()[[k, j]].abs());
                }
            }
            lambda_max /= n as f64;
            if !(lambda_max > 0.0) || !lambda_max.is_finite() {
                return Err(EasError::degenerate(
                    "cannot scale a penalty grid from all-zero data",
                ));
            }
            auto_grid(lambda_max)
        }
    };

    let folds = forward_chaining_folds(n, cfg.cv_folds)?;
    // per-fold training Gram and cross products, shared by all equations
    let fold_parts: Vec<(Array2<f64>, Array2<f64>, usize)> = folds
        .iter()
        .map(|test| {
            let train = test.start;
            let xs = data.x().slice(ndarray::s![.., ..train]).to_owned();
            let ys = data.y().slice(ndarray::s![.., ..train]).to_owned();
            (xs.dot(&xs.t()), xs.dot(&ys.t()), train)
        })
        .collect();

    let mut coeffs = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut cv_err = vec![0.0f64; grid.len()];
        for (test, (gram_f, xy_f, train)) in folds.iter().zip(&fold_parts) {
            debug_assert!(test.start == *train, "validation block must follow training");
            let xy: Vec<f64> = xy_f.column(j).to_vec();
            let mut a = vec![0.0; p];
            for (li, &lambda) in grid.iter().enumerate() {
                coordinate_descent(
                    &gram_f.view(),
                    &xy,
                    *train,
                    lambda,
                    cfg.l1_ratio,
                    cfg.tol,
                    cfg.max_iter,
                    &mut a,
                );
                for t in test.clone() {
                    let mut pred = 0.0;
                    for k in 0..p {
                        pred += a[k] * data.x()[[k, t]];
                    }
                    let e = data.y()[[j, t]] - pred;
                    cv_err[li] += e * e;
                }
            }
        }
        let mut best = 0;
        for li in 1..grid.len() {
            if cv_err[li] < cv_err[best] {
                best = li;
            }
        }
        // refit on the full sample, walking the path down to the winner
        let xy: Vec<f64> = data.xyt().column(j).to_vec();
        let mut a = vec![0.0; p];
        for &lambda in &grid[..=best] {
            coordinate_descent(
                &data.xxt().view(),
                &xy,
                n,
                lambda,
                cfg.l1_ratio,
                cfg.tol,
                cfg.max_iter,
                &mut a,
            );
        }
        for k in 0..p {
            coeffs[[j, k]] = a[k];
        }
    }

    let graph = Graph::from_support(&coeffs.view())?;
    let a = TransitionMatrix::sparse(coeffs, &graph)?;
    Ok((a, graph))
}

/// Cross-validated LASSO: the elastic net at `l1_ratio = 1`.
pub fn lasso_var(data: &TimeSeriesData, cfg: &EnetConfig) -> Result<(TransitionMatrix, Graph)> {
    enet_var(
        data,
        &EnetConfig {
            l1_ratio: 1.0,
            ..cfg.clone()
        },
    )
}
