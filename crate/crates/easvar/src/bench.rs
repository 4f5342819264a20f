//! Verifiability conditions, performance metrics, and the experiment runner.
//!
//! Condition 1 is the only check computable from data alone:
//! `sqrt(n) * min(lambda_min(XX'/n), 1)` against the practical worst-case
//! threshold `8`. Conditions 2 and 3 need the generating model, so they are
//! synthetic-experiment diagnostics: both reduce to drop-one quadratic
//! minima under population metrics built from the stationary second moment
//! `Gamma_n(0)`, and in both the self-calibrating scale cancels between the
//! threshold and its normalizer, leaving pure `(n, p)` rates. Conditions 4
//! and 5 are asymptotic statements with nothing to check on finite data.
//!
//! The experiment runner reproduces the synthetic-benchmark layout: per
//! seed, draw a patterned transition matrix, simulate `2n` transitions,
//! train every method on the first half, and score on the held-out second
//! half.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{enet_var, lasso_var, EnetConfig};
use crate::data::TimeSeriesData;
use crate::eas::{calibrate_d, dropone_quadratic_min, epsilon_multiplier, EasParams};
use crate::error::{EasError, Result};
use crate::estim::least_squares;
use crate::gimh::{run_chain, ChainConfig, ChainResult};
use crate::graph::Graph;
use crate::linalg::{cholesky, frobenius_norm, spectral_norm, sym_eigenvalues, PIVOT_REL_TOL};
use crate::model::{gamma_n0, simulate_var, NoiseScale, TransitionMatrix};
use crate::patterns::{generate_pattern, PatternKind};
use crate::rng::{derive_seed, domain};

/// Practical worst-case threshold for condition 1 (`4 (1 + c^2)` at `c = 1`).
pub const COND1_PRACTICAL_THRESHOLD: f64 = 8.0;

/// Printed wherever condition verdicts are reported.
pub const ASYMPTOTIC_NOTE: &str =
    "conditions 4-5: informational: not verifiable on finite data";

/// Out-of-sample and support-recovery metrics for one fitted model. Fields
/// whose inputs were absent are omitted, never defaulted.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRecord {
    /// Spectral norm of the test residual over the test length.
    pub l2_err: f64,
    /// Frobenius norm of the test residual over the test length.
    pub lf_err: f64,
    /// `||A_hat - A0||_F / ||A0||_F`; needs the generating matrix.
    pub est_err: Option<f64>,
    /// Size of the selected graph, when the method selects one.
    pub g_size: Option<usize>,
    /// Inactive oracle entries set active, over truly inactive entries.
    pub fpr: Option<f64>,
    /// Active oracle entries set inactive, over truly active entries.
    pub fnr: Option<f64>,
    /// Chain visit frequency of the oracle graph.
    pub r_hat_go: Option<f64>,
    pub map_equals_oracle: Option<bool>,
}

/// Condition verdicts for one data set.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub cond1_value: f64,
    pub cond1_threshold: f64,
    pub cond1_pass: bool,
    /// Present only when the generating model was supplied.
    pub cond2_pass: Option<bool>,
    pub cond3_pass: Option<bool>,
}

/// `sqrt(n) * min(lambda_min(XX'/n), 1)`.
pub fn condition1_value(data: &TimeSeriesData) -> f64 {
    let n = data.n() as f64;
    let scaled = data.xxt() / n;
    let eigs = sym_eigenvalues(&scaled.view());
    n.sqrt() * eigs[0].min(1.0)
}

/// Condition 1 against the practical threshold 8.
pub fn check_condition1(data: &TimeSeriesData) -> (f64, bool) {
    let value = condition1_value(data);
    (value, value > COND1_PRACTICAL_THRESHOLD)
}

/// Condition 1 against the theoretical threshold `4 (1 + c^2)` for a known
/// stability bound `c`.
pub fn check_condition1_against(data: &TimeSeriesData, c: f64) -> (f64, bool) {
    let value = condition1_value(data);
    (value, value > 4.0 * (1.0 + c * c))
}

fn restricted(m: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| m[[idx[a], idx[b]]])
}

/// Condition 2: the oracle coefficients must be separated from every
/// one-sparser approximation under the population metric
/// `(Gamma_n(0) (x) (Sigma0)^{-1})_{G_o, G_o}`. Returns `(lhs, rhs, pass)`
/// with `pass = lhs >= rhs`; a singular restricted block is an error.
pub fn check_condition2(
    a0: &TransitionMatrix,
    sigma0: &NoiseScale,
    g_o: &Graph,
    n: usize,
    params: &EasParams,
) -> Result<(f64, f64, bool)> {
    params.validate()?;
    let p = a0.p();
    if sigma0.p() != p || g_o.p() != p {
        return Err(EasError::dim("model, noise, and graph sizes must agree"));
    }
    let gamma = gamma_n0(a0, sigma0, n)?;
    let mut blocks = Vec::with_capacity(p);
    let mut alpha = Vec::with_capacity(p);
    for (j, row) in g_o.rows().iter().enumerate() {
        blocks.push(restricted(&gamma, row) / sigma0.sigma2()[j]);
        alpha.push(row.iter().map(|&k| a0.matrix()[[j, k]]).collect::<Vec<_>>());
    }
    let quad = dropone_quadratic_min(&blocks, &alpha).ok_or_else(|| {
        EasError::degenerate("singular restricted population block in condition 2")
    })?;
    let lhs = quad / 18.0;
    let mult = epsilon_multiplier(n, p, g_o.size(), params)?;
    let rhs = mult / ((n as f64).powf(1.0 - params.rho) * (p * p) as f64);
    Ok((lhs, rhs, lhs >= rhs))
}

/// Condition 3: a non-subset candidate graph must admit a good one-sparser
/// approximation of its population projection. Returns `(lhs, rhs, pass)`
/// with `pass = lhs < rhs`. Linearly dependent population columns make the
/// condition hold trivially (`lhs = 0`).
pub fn check_condition3(
    a0: &TransitionMatrix,
    sigma0: &NoiseScale,
    g: &Graph,
    n: usize,
    params: &EasParams,
) -> Result<(f64, f64, bool)> {
    params.validate()?;
    let p = a0.p();
    if sigma0.p() != p || g.p() != p {
        return Err(EasError::dim("model, noise, and graph sizes must agree"));
    }
    let gamma = gamma_n0(a0, sigma0, n)?;
    let ag = a0.matrix().dot(&gamma);
    let mut min_v2 = f64::INFINITY;
    let mut any = false;
    let mut dependent = false;
    'rows: for (j, row) in g.rows().iter().enumerate() {
        if row.is_empty() {
            continue;
        }
        any = true;
        let block = restricted(&gamma, row);
        let ch = match cholesky(&block.view(), PIVOT_REL_TOL) {
            Ok(ch) => ch,
            Err(_) => {
                dependent = true;
                break 'rows;
            }
        };
        let mut v: Vec<f64> = row.iter().map(|&k| ag[[j, k]]).collect();
        ch.solve_in_place(&mut v);
        for vi in v {
            min_v2 = min_v2.min(vi * vi);
        }
    }
    let lhs = if dependent || !any { 0.0 } else { 4.5 * min_v2 };
    let mult = epsilon_multiplier(n, p, g.size(), params)?;
    let rhs = mult / ((n as f64).powf(1.0 + 0.5 * params.rho) * (p * p * p) as f64);
    Ok((lhs, rhs, lhs < rhs))
}

/// Score one fitted transition matrix on held-out data, plus any
/// support-recovery metrics the supplied inputs allow.
pub fn compute_metrics(
    test: &TimeSeriesData,
    a_hat: &ArrayView2<f64>,
    est_graph: Option<&Graph>,
    oracle: Option<(&ArrayView2<f64>, &Graph)>,
    chain: Option<&ChainResult>,
) -> Result<MetricRecord> {
    let p = test.p();
    if a_hat.nrows() != p || a_hat.ncols() != p {
        return Err(EasError::dim(format!(
            "coefficient matrix is {}x{}, data has p = {p}",
            a_hat.nrows(),
            a_hat.ncols()
        )));
    }
    let n = test.n() as f64;
    let resid = &test.y().to_owned() - &a_hat.dot(&test.x());
    // power-iterate the smaller Gram side
    let l2_err = if resid.ncols() > resid.nrows() {
        spectral_norm(&resid.view().reversed_axes()) / n
    } else {
        spectral_norm(&resid.view()) / n
    };
    let lf_err = frobenius_norm(&resid.view()) / n;

    let est_err = oracle.and_then(|(a0, _)| {
        let denom = frobenius_norm(a0);
        if denom > 0.0 {
            Some(frobenius_norm(&(a_hat.to_owned() - a0).view()) / denom)
        } else {
            None
        }
    });

    let (mut fpr, mut fnr) = (None, None);
    if let (Some(est), Some((_, g_o))) = (est_graph, oracle) {
        let mut false_pos = 0usize;
        let mut false_neg = 0usize;
        for j in 0..p {
            for k in 0..p {
                match (est.contains(j, k), g_o.contains(j, k)) {
                    (true, false) => false_pos += 1,
                    (false, true) => false_neg += 1,
                    _ => {}
                }
            }
        }
        let inactive = p * p - g_o.size();
        let active = g_o.size();
        if inactive > 0 {
            fpr = Some(false_pos as f64 / inactive as f64);
        }
        if active > 0 {
            fnr = Some(false_neg as f64 / active as f64);
        }
    }

    let r_hat_go = match (chain, oracle) {
        (Some(c), Some((_, g_o))) => Some(c.visit_frequency(g_o)),
        _ => None,
    };
    let map_equals_oracle = match (chain, oracle) {
        (Some(c), Some((_, g_o))) => Some(&c.map_graph == g_o),
        _ => None,
    };

    Ok(MetricRecord {
        l2_err,
        lf_err,
        est_err,
        g_size: est_graph.map(Graph::size),
        fpr,
        fnr,
        r_hat_go,
        map_equals_oracle,
    })
}

/// Estimation methods the experiment runner can score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Least squares on the oracle graph.
    OracleLs,
    /// Admissible-subset selection via the graph sampler.
    Eas,
    Lasso,
    Enet,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::OracleLs, Method::Eas, Method::Lasso, Method::Enet];

    pub fn name(&self) -> &'static str {
        match self {
            Method::OracleLs => "oracle",
            Method::Eas => "eas",
            Method::Lasso => "lasso",
            Method::Enet => "enet",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = EasError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Method::OracleLs),
            "eas" => Ok(Method::Eas),
            "lasso" => Ok(Method::Lasso),
            "enet" => Ok(Method::Enet),
            other => Err(EasError::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Synthetic experiment layout: `seeds` independent draws of a `p`-series
/// pattern, each simulated for `2n` transitions and split in half.
#[derive(Debug, Clone)]
pub struct Design {
    pub p: usize,
    pub n: usize,
    pub pattern: PatternKind,
    pub seeds: usize,
    pub base_seed: u64,
}

/// One method's scores on one seed.
#[derive(Debug, Clone, Serialize)]
pub struct MethodResult {
    pub method: String,
    pub metrics: MetricRecord,
}

/// Everything recorded for one seed of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SeedOutcome {
    pub seed_index: usize,
    pub oracle_size: usize,
    pub cond1_value: f64,
    pub cond1_pass: bool,
    pub cond2_lhs: Option<f64>,
    pub cond2_rhs: Option<f64>,
    pub cond2_pass: Option<bool>,
    pub results: Vec<MethodResult>,
    /// Set when the seed failed outright; its other fields are then partial.
    pub error: Option<String>,
}

/// Experiment output, one row per seed.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentTable {
    pub rows: Vec<SeedOutcome>,
}

impl ExperimentTable {
    /// Values of one metric for one method across non-failed seeds.
    pub fn metric_values<F>(&self, method: &str, f: F) -> Vec<f64>
    where
        F: Fn(&MetricRecord) -> Option<f64>,
    {
        self.rows
            .iter()
            .flat_map(|row| row.results.iter())
            .filter(|r| r.method == method)
            .filter_map(|r| f(&r.metrics))
            .collect()
    }

    pub fn cond1_values(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.error.is_none())
            .map(|r| r.cond1_value)
            .collect()
    }

    /// Fraction of seeds (with a verdict) where condition 2 held.
    pub fn cond2_pass_rate(&self) -> Option<f64> {
        let verdicts: Vec<bool> = self.rows.iter().filter_map(|r| r.cond2_pass).collect();
        if verdicts.is_empty() {
            return None;
        }
        Some(verdicts.iter().filter(|&&b| b).count() as f64 / verdicts.len() as f64)
    }

    /// Fraction of one method's rows whose MAP graph equals the oracle.
    pub fn map_match_rate(&self, method: &str) -> Option<f64> {
        let verdicts: Vec<bool> = self
            .rows
            .iter()
            .flat_map(|row| row.results.iter())
            .filter(|r| r.method == method)
            .filter_map(|r| r.metrics.map_equals_oracle)
            .collect();
        if verdicts.is_empty() {
            return None;
        }
        Some(verdicts.iter().filter(|&&b| b).count() as f64 / verdicts.len() as f64)
    }
}

/// Sample mean and standard error (sd over `sqrt(k)`); `(nan, nan)` for an
/// empty slice.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

fn run_one_seed(
    design: &Design,
    methods: &[Method],
    eas: &EasParams,
    chain: &ChainConfig,
    enet: &EnetConfig,
    seed_index: usize,
) -> Result<SeedOutcome> {
    let seed = derive_seed(design.base_seed, domain::EXPERIMENT_SEED, seed_index as u64);
    let (a0, g_o) = generate_pattern(design.pattern, design.p, seed)?;
    let sigma0 = NoiseScale::identity(design.p)?;
    let full = simulate_var(&a0, &sigma0, 2 * design.n, seed)?;
    let train = full.window(0, design.n)?;
    let test = full.window(design.n, design.n)?;

    let (cond1_value, cond1_pass) = check_condition1(&train);
    let (cond2_lhs, cond2_rhs, cond2_pass) =
        match check_condition2(&a0, &sigma0, &g_o, design.n, eas) {
            Ok((lhs, rhs, pass)) => (Some(lhs), Some(rhs), Some(pass)),
            Err(EasError::Degenerate(_)) => (None, None, Some(false)),
            Err(e) => return Err(e),
        };

    let a0_view = a0.view();
    let oracle = Some((&a0_view, &g_o));
    let mut results = Vec::new();
    for method in methods {
        let metrics = match method {
            Method::OracleLs => {
                let fit = least_squares(&train, &g_o)?;
                let dense = fit.coefficient_matrix()?;
                compute_metrics(&test, &dense.view(), Some(&g_o), oracle, None)?
            }
            Method::Eas => {
                let (_, enet_graph) = enet_var(&train, enet)?;
                let d = calibrate_d(&train, &enet_graph)?;
                let params = EasParams { d, ..eas.clone() };
                let cfg = ChainConfig {
                    seed,
                    ..chain.clone()
                };
                let result = run_chain(&train, &params, &cfg)?;
                compute_metrics(
                    &test,
                    &result.a_bma.view(),
                    Some(&result.map_graph),
                    oracle,
                    Some(&result),
                )?
            }
            Method::Lasso => {
                let (a, g) = lasso_var(&train, enet)?;
                compute_metrics(&test, &a.view(), Some(&g), oracle, None)?
            }
            Method::Enet => {
                let (a, g) = enet_var(&train, enet)?;
                compute_metrics(&test, &a.view(), Some(&g), oracle, None)?
            }
        };
        results.push(MethodResult {
            method: method.name().to_string(),
            metrics,
        });
    }

    Ok(SeedOutcome {
        seed_index,
        oracle_size: g_o.size(),
        cond1_value,
        cond1_pass,
        cond2_lhs,
        cond2_rhs,
        cond2_pass,
        results,
        error: None,
    })
}

/// Run every method over every seed of a design. Per-seed failures are
/// recorded in their row rather than aborting the sweep.
pub fn run_experiment(
    design: &Design,
    methods: &[Method],
    eas: &EasParams,
    chain: &ChainConfig,
    enet: &EnetConfig,
) -> Result<ExperimentTable> {
    if design.seeds == 0 {
        return Err(EasError::invalid("design needs at least one seed"));
    }
    eas.validate()?;
    chain.validate()?;
    enet.validate()?;
    // Seeds are independent replicates with derived RNG streams, so they
    // parallelize freely; collect() keeps them in seed order.
    let rows = (0..design.seeds)
        .into_par_iter()
        .map(|s| match run_one_seed(design, methods, eas, chain, enet, s) {
            Ok(row) => row,
            Err(e) => {
                log::warn!("seed {s} failed: {e}");
                SeedOutcome {
                    seed_index: s,
                    oracle_size: 0,
                    cond1_value: f64::NAN,
                    cond1_pass: false,
                    cond2_lhs: None,
                    cond2_rhs: None,
                    cond2_pass: None,
                    results: Vec::new(),
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    Ok(ExperimentTable { rows })
}
