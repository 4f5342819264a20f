//! The epsilon-admissibility h-function.
//!
//! A coefficient draw `(alpha, {sigma_j})` for graph `G` is epsilon-admissible
//! when three constraints hold:
//!
//! 1. no strictly sparser coefficient vector approximates it too well:
//!    `b_min >= epsilon`, where `b_min` is half the minimum over coordinates
//!    of the quadratic cost of zeroing one coordinate under the metric
//!    `M = Z_G' W^{-1} Z_G`;
//! 2. the fit is not degenerate: `min_j m_j >= d`;
//! 3. the implied transition matrix is stable: `||A_g||_2` within the bound
//!    (strictly below one in the practical mode).
//!
//! The L0 constraint behind `b_min` ("at most `|G| - 1` nonzeros") reduces to
//! pinning one coordinate of `alpha - b` to `alpha_i`, whose quadratic
//! minimum has the closed form `alpha_i^2 / [(M^2)^{-1}]_{ii}`. Because `M`
//! is block diagonal across equations, the diagonals of `(M^2)^{-1}` are
//! computed per equation and the statistic costs `O(|G|)` per draw once a
//! graph's block inverses are cached.

use ndarray::Array2;

use crate::data::TimeSeriesData;
use crate::error::{EasError, Result};
use crate::estim::{least_squares, GraphFit};
use crate::graph::Graph;
use crate::linalg::{cholesky, spectral_norm_within, PIVOT_REL_TOL};

/// How the admissibility threshold epsilon is formed from `Lambda_g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonMode {
    /// `epsilon = Lambda_g`: the data-calibrated component alone. The
    /// operational default; leaves no tuning parameter.
    PracticalLambda,
    /// `epsilon = Lambda_g * max{1, n^(1-rho) p^2 (0.5 log(log n) |G| - |G_o|)}`,
    /// requiring an oracle-size hint.
    FullDefault,
}

/// Which Jacobian column scaling the mass uses; see `gfi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianVariant {
    /// Residual columns as-is: the log-Jacobian carries `sum_j log m_j / 2`.
    Standard,
    /// Residual columns scaled to unit norm (sensitivity variant).
    NormalizedResiduals,
}

/// Tuning of the admissibility constraints.
#[derive(Debug, Clone)]
pub struct EasParams {
    pub epsilon_mode: EpsilonMode,
    /// Rate parameter in the default epsilon, in `(0, 0.5)`.
    pub rho: f64,
    /// Floor for the per-equation residual sums of squares.
    pub d: f64,
    /// Stability bound `c`; at the default `1.0` the check is the strict
    /// practical constraint `||A_g||_2 < 1`, below it the theoretical
    /// `||A_g||_2 <= c`.
    pub c_bound: f64,
    /// `|G_o|` for `FullDefault` mode.
    pub g_o_size_hint: Option<usize>,
    pub jacobian_variant: JacobianVariant,
}

impl Default for EasParams {
    fn default() -> Self {
        EasParams {
            epsilon_mode: EpsilonMode::PracticalLambda,
            rho: 0.49,
            d: 0.0,
            c_bound: 1.0,
            g_o_size_hint: None,
            jacobian_variant: JacobianVariant::Standard,
        }
    }
}

impl EasParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 0.5) {
            return Err(EasError::invalid(format!(
                "rho must lie in (0, 0.5), got {}",
                self.rho
            )));
        }
        if !(self.d >= 0.0) || !self.d.is_finite() {
            return Err(EasError::invalid(format!(
                "d must be nonnegative and finite, got {}",
                self.d
            )));
        }
        if !(self.c_bound > 0.0 && self.c_bound <= 1.0) {
            return Err(EasError::invalid(format!(
                "c_bound must lie in (0, 1], got {}",
                self.c_bound
            )));
        }
        if self.epsilon_mode == EpsilonMode::FullDefault && self.g_o_size_hint.is_none() {
            return Err(EasError::invalid(
                "FullDefault epsilon mode requires g_o_size_hint",
            ));
        }
        Ok(())
    }

    /// Whether the stability check is the strict practical one.
    pub(crate) fn strict_stability(&self) -> bool {
        self.c_bound == 1.0
    }
}

/// `min_i alpha_i^2 / [(M^2)^{-1}]_{ii}` over a block-diagonal PD metric,
/// the common core of the admissibility statistic and the condition-2/3
/// checkers. `None` when a nonempty block is numerically singular;
/// `+infinity` when there are no coordinates at all.
pub(crate) fn dropone_quadratic_min(blocks: &[Array2<f64>], alpha: &[Vec<f64>]) -> Option<f64> {
    debug_assert_eq!(blocks.len(), alpha.len());
    let mut best = f64::INFINITY;
    for (block, a) in blocks.iter().zip(alpha) {
        debug_assert_eq!(block.nrows(), a.len());
        if a.is_empty() {
            continue;
        }
        let ch = cholesky(&block.view(), PIVOT_REL_TOL).ok()?;
        let inv = ch.inverse();
        let k = a.len();
        for i in 0..k {
            let mut d2 = 0.0;
            for c in 0..k {
                d2 += inv[[i, c]] * inv[[i, c]];
            }
            // d2 = [(B^{-1})^2]_{ii} = [(B^2)^{-1}]_{ii}
            best = best.min(a[i] * a[i] / d2);
        }
    }
    Some(best)
}

/// The `b_min` admissibility statistic for a block-diagonal metric `M`
/// (one block and one coefficient slice per equation; empty equations may
/// be passed as `0 x 0` blocks).
///
/// Returns `0` when `M` is numerically singular: a sparser approximation
/// with zero cost exists. With no coordinates at all the minimum is vacuous
/// (`+infinity`).
pub fn bmin_statistic(blocks: &[Array2<f64>], alpha: &[Vec<f64>]) -> f64 {
    match dropone_quadratic_min(blocks, alpha) {
        Some(v) => 0.5 * v,
        None => 0.0,
    }
}

/// The graph-size-dependent factor multiplying `Lambda_g` in the default
/// epsilon: `1` in `PracticalLambda` mode.
pub fn epsilon_multiplier(n: usize, p: usize, g_size: usize, params: &EasParams) -> Result<f64> {
    params.validate()?;
    match params.epsilon_mode {
        EpsilonMode::PracticalLambda => Ok(1.0),
        EpsilonMode::FullDefault => {
            let g_o = params.g_o_size_hint.expect("validated above") as f64;
            let n_f = n as f64;
            let growth = n_f.powf(1.0 - params.rho)
                * (p * p) as f64
                * (0.5 * n_f.ln().ln() * g_size as f64 - g_o);
            Ok(growth.max(1.0))
        }
    }
}

/// The default admissibility threshold for one graph.
pub fn epsilon_default(
    lambda_g: f64,
    n: usize,
    p: usize,
    g_size: usize,
    params: &EasParams,
) -> Result<f64> {
    if !(lambda_g > 0.0) || !lambda_g.is_finite() {
        return Err(EasError::invalid(format!(
            "lambda_g must be positive and finite, got {lambda_g}"
        )));
    }
    Ok(lambda_g * epsilon_multiplier(n, p, g_size, params)?)
}

/// Evaluate the h-function for one coefficient draw.
///
/// `alpha` holds per-equation coefficient slices aligned with the fit's
/// graph; `sigma2` the drawn variances. Degenerate numerical inputs yield
/// `false`; only shape mismatches are errors.
pub fn h_function(
    alpha: &[Vec<f64>],
    sigma2: &[f64],
    fit: &GraphFit,
    params: &EasParams,
    epsilon: f64,
) -> Result<bool> {
    params.validate()?;
    let p = fit.p();
    if alpha.len() != p || sigma2.len() != p {
        return Err(EasError::dim(format!(
            "h expects {p} equations, got {} alpha slices and {} variances",
            alpha.len(),
            sigma2.len()
        )));
    }
    for j in 0..p {
        if alpha[j].len() != fit.graph().row(j).len() {
            return Err(EasError::dim(format!(
                "alpha slice {j} has {} coordinates, graph row has {}",
                alpha[j].len(),
                fit.graph().row(j).len()
            )));
        }
    }
    let g_size = fit.graph().size();
    if g_size == 0 || g_size > fit.n() * p {
        return Ok(false);
    }
    if !(fit.min_m() >= params.d) {
        return Ok(false);
    }
    if sigma2.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Ok(false);
    }

    // b_min under M = blockdiag(B_j / sigma_j^2) via the cached diagonals:
    // [((B/s)^2)^{-1}]_{ii} = s^2 [(B^2)^{-1}]_{ii} with s = sigma_j^2.
    let mut stat = f64::INFINITY;
    for j in 0..p {
        let s2 = sigma2[j] * sigma2[j];
        for (ai, d2) in alpha[j].iter().zip(&fit.bsq_inv_diag()[j]) {
            stat = stat.min(ai * ai / (s2 * d2));
        }
    }
    let stat = 0.5 * stat;
    if !(stat >= epsilon) {
        return Ok(false);
    }

    let mut a = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        for (idx, &k) in fit.graph().row(j).iter().enumerate() {
            a[[j, k]] = alpha[j][idx];
        }
    }
    Ok(spectral_norm_within(
        &a.view(),
        params.c_bound,
        params.strict_stability(),
    ))
}

/// `d = min_j m_j / 10` from a baseline graph's least-squares fit. A
/// rank-deficient baseline disables the floor (`d = 0`).
pub fn calibrate_d(data: &TimeSeriesData, baseline_graph: &Graph) -> Result<f64> {
    match least_squares(data, baseline_graph) {
        Ok(fit) => Ok(fit.min_m() / 10.0),
        Err(EasError::RankDeficient { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}
