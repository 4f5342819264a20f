//! Unnormalized graph mass via the fiducial Jacobian and importance sampling.
//!
//! The mass of a graph is `E(h) * |D'D|^(1/2) * prod_j (m_j/2)^(-(n-|r_j|)/2)
//! Gamma((n-|r_j|)/2) / [(n/2pi)^(|G|/2) prod_j |B_j|^(1/2)]`, where `D` is
//! the `(np) x (|G|+p)` design-augmented-by-residuals matrix and the
//! expectation runs over the importance distribution of `(alpha, {sigma_j})`.
//! All arithmetic is in log space; impossible graphs get `-inf` rather than
//! an error so that samplers can treat them as zero-probability states.
//!
//! Key structural facts exploited throughout:
//!
//! * `D'D` is block diagonal once the residual columns are appended: each
//!   equation's residual is orthogonal to that equation's predictors, and
//!   columns of different equations live on disjoint coordinates. Hence
//!   `log|D'D| = sum_j log|B_j| + sum_j log m_j` and nothing `(np)`-sized is
//!   ever materialized.
//! * The importance distribution factorizes per equation: `sigma_j^2` is
//!   inverse-gamma with shape `(n-|r_j|)/2` and rate `m_j/2`, and
//!   `alpha_j | sigma_j` is Gaussian around the least-squares solution with
//!   covariance `sigma_j^2 B_j^{-1}`.
//!
//! Draw `s` of an estimate consumes its own RNG substream, so an estimate is
//! a pure function of `(data, graph, params, draws, seed)`.

use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::data::TimeSeriesData;
use crate::eas::{epsilon_multiplier, h_function, EasParams, JacobianVariant};
use crate::error::{EasError, Result};
use crate::estim::{least_squares, GraphFit};
use crate::graph::Graph;
use crate::rng;

/// Monte Carlo estimate of one graph's unnormalized log mass.
#[derive(Debug, Clone, Copy)]
pub struct MassEstimate {
    /// Log of the unnormalized mass; `-inf` for rank-deficient or
    /// never-admissible graphs.
    pub log_mass: f64,
    /// `0.5 * log|D'D|`; `-inf` when a residual vanishes exactly.
    pub log_jacobian: f64,
    /// Fraction of importance draws that were admissible.
    pub admissible_fraction: f64,
    /// Number of importance draws requested.
    pub draws: usize,
    /// Seed the draws were derived from.
    pub seed: u64,
}

impl MassEstimate {
    fn degenerate(draws: usize, seed: u64) -> Self {
        MassEstimate {
            log_mass: f64::NEG_INFINITY,
            log_jacobian: f64::NEG_INFINITY,
            admissible_fraction: 0.0,
            draws,
            seed,
        }
    }
}

/// `0.5 * log|D'D|` for the fitted graph, where `D = [Z_G | R]` appends one
/// masked residual column per equation to the active design columns.
///
/// Orthogonality of each residual to its own predictors zeroes the cross
/// blocks, so the determinant splits into the per-equation Gram determinants
/// and the residual norms. The `NormalizedResiduals` variant rescales each
/// residual column to unit norm, which drops the `log m_j` terms. An exactly
/// vanishing residual makes `D'D` singular: `-inf`.
pub fn jacobian_logdet(fit: &GraphFit, variant: JacobianVariant) -> f64 {
    let mut total = 0.0;
    for j in 0..fit.p() {
        let m_j = fit.m()[j];
        if !(m_j > 0.0) || !m_j.is_finite() {
            return f64::NEG_INFINITY;
        }
        total += fit.logdet_blocks()[j];
        if variant == JacobianVariant::Standard {
            total += m_j.ln();
        }
    }
    0.5 * total
}

/// One draw from the importance distribution of `(alpha, {sigma_j^2})`.
///
/// Consumption order is fixed: all `p` variances first, then the coefficient
/// slices equation by equation. Requires `n > |r_j|` (positive inverse-gamma
/// shape) and `m_j > 0` for every equation.
pub fn importance_draw<R: rand::Rng>(
    fit: &GraphFit,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let p = fit.p();
    let n = fit.n();
    let mut sigma2 = Vec::with_capacity(p);
    for j in 0..p {
        let df = n as f64 - fit.graph().row(j).len() as f64;
        let m_j = fit.m()[j];
        if df <= 0.0 || !(m_j > 0.0) {
            return Err(EasError::degenerate(format!(
                "equation {j}: importance draw needs n > |r_j| and m_j > 0 \
                 (n = {n}, |r_j| = {}, m_j = {m_j})",
                fit.graph().row(j).len()
            )));
        }
        let gamma = Gamma::new(0.5 * df, 1.0)
            .map_err(|e| EasError::degenerate(format!("gamma shape: {e}")))?;
        // X ~ Gamma(shape, 1) => (m_j/2)/X ~ InvGamma(shape, rate m_j/2)
        sigma2.push(0.5 * m_j / gamma.sample(rng));
    }
    let mut alpha = Vec::with_capacity(p);
    for j in 0..p {
        let k = fit.graph().row(j).len();
        let mut a = vec![0.0; k];
        if k > 0 {
            for v in a.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let chol = fit.chol_block(j).expect("nonempty row has a factor");
            // z -> L^{-T} z has covariance B^{-1}
            chol.solve_lt_in_place(&mut a);
            let sd = sigma2[j].sqrt();
            for (v, ahat) in a.iter_mut().zip(&fit.alpha_hat()[j]) {
                *v = ahat + sd * *v;
            }
        }
        alpha.push(a);
    }
    Ok((alpha, sigma2))
}

/// Empirical `log E(h)` plus the Jacobian: `jacobian_logdet + log(k/S)` with
/// `k` the admissible draw count. Returns the log estimate and the
/// admissible fraction. The threshold is recomputed from each draw's
/// variances (`epsilon = Lambda_g(sigma) * multiplier`).
pub fn estimate_log_eh(
    fit: &GraphFit,
    params: &EasParams,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if draws == 0 {
        return Err(EasError::invalid("draw count must be positive"));
    }
    params.validate()?;
    let multiplier = epsilon_multiplier(fit.n(), fit.p(), fit.graph().size(), params)?;
    let jac = jacobian_logdet(fit, params.jacobian_variant);
    if jac == f64::NEG_INFINITY {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    let mut admitted = 0usize;
    for s in 0..draws {
        let mut rng = rng::substream(seed, s as u64);
        let (alpha, sigma2) = importance_draw(fit, &mut rng)?;
        let epsilon = fit.lambda_with(&sigma2) * multiplier;
        if h_function(&alpha, &sigma2, fit, params, epsilon)? {
            admitted += 1;
        }
    }
    let fraction = admitted as f64 / draws as f64;
    if admitted == 0 {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    Ok((jac + fraction.ln(), fraction))
}

/// Estimate the unnormalized log mass of one graph.
///
/// Structural impossibilities (oversized graph, rank-deficient fit, vanished
/// residual, nonpositive inverse-gamma shape, no admissible draw) yield a
/// `-inf` estimate; only malformed inputs are errors.
pub fn log_graph_mass(
    data: &TimeSeriesData,
    graph: &Graph,
    params: &EasParams,
    draws: usize,
    seed: u64,
) -> Result<MassEstimate> {
    if draws == 0 {
        return Err(EasError::invalid("draw count must be positive"));
    }
    params.validate()?;
    if graph.p() != data.p() {
        return Err(EasError::dim(format!(
            "graph is over {} series, data has {}",
            graph.p(),
            data.p()
        )));
    }
    let p = data.p();
    let n = data.n();
    if graph.size() > n * p {
        return Ok(MassEstimate::degenerate(draws, seed));
    }
    let fit = match least_squares(data, graph) {
        Ok(fit) => fit,
        Err(EasError::RankDeficient { .. }) => {
            return Ok(MassEstimate::degenerate(draws, seed))
        }
        Err(e) => return Err(e),
    };
    if !(fit.min_m() > 0.0) || n <= graph.rows().iter().map(Vec::len).max().unwrap_or(0) {
        return Ok(MassEstimate::degenerate(draws, seed));
    }

    let (log_eh, fraction) = estimate_log_eh(&fit, params, draws, seed)?;
    let jac = jacobian_logdet(&fit, params.jacobian_variant);
    if log_eh == f64::NEG_INFINITY {
        return Ok(MassEstimate {
            log_mass: f64::NEG_INFINITY,
            log_jacobian: jac,
            admissible_fraction: fraction,
            draws,
            seed,
        });
    }

    let n_f = n as f64;
    let mut log_mass = log_eh;
    for j in 0..p {
        let df = 0.5 * (n_f - graph.row(j).len() as f64);
        log_mass += libm::lgamma(df) - df * (0.5 * fit.m()[j]).ln();
    }
    log_mass -= 0.5 * graph.size() as f64 * (n_f / std::f64::consts::TAU).ln();
    log_mass -= 0.5 * fit.logdet_blocks().iter().sum::<f64>();

    Ok(MassEstimate {
        log_mass,
        log_jacobian: jac,
        admissible_fraction: fraction,
        draws,
        seed,
    })
}

/// Exp-normalize log masses into a probability vector. `-inf` entries get
/// probability zero; all-`-inf` input is an error.
pub fn normalize_log_masses(log_masses: &[f64]) -> Result<Vec<f64>> {
    let max = log_masses
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(EasError::degenerate(
            "every graph in the family has zero mass",
        ));
    }
    let weights: Vec<f64> = log_masses.iter().map(|&lm| (lm - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}
