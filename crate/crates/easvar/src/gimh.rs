//! Pseudo-marginal Metropolis-Hastings over graphs.
//!
//! The sampler walks graph space with add/remove/swap moves and accepts with
//! the grouped-independence rule: the current graph keeps the Monte Carlo
//! mass estimate it was accepted with, and every candidate is scored with a
//! fresh estimate from its own seed. Refreshing the retained estimate would
//! silently change the stationary distribution, so nothing here ever does.
//!
//! Moves that would leave `[1, max_size]` are disabled and the remaining
//! move probabilities renormalized; the Hastings correction is computed from
//! those boundary-adjusted probabilities on both ends, so the chain stays
//! exact at the boundaries. Candidates with `-inf` mass are never accepted.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;

use crate::baselines::{enet_var, EnetConfig};
use crate::data::TimeSeriesData;
use crate::eas::EasParams;
use crate::error::{EasError, Result};
use crate::estim::least_squares;
use crate::gfi::log_graph_mass;
use crate::graph::Graph;
use crate::rng::{self, domain};

/// Starting graph of a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainInit {
    /// Self-loops only.
    Diagonal,
    /// Support of the cross-validated elastic net fit.
    BaselineGraph,
    /// A caller-chosen graph.
    Explicit(Graph),
}

/// Chain length, proposal mixture, and mass-estimate settings.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub steps: usize,
    pub burn_in: usize,
    /// Importance draws per mass estimate.
    pub mass_draws: usize,
    pub seed: u64,
    pub init: ChainInit,
    /// Largest graph the chain may visit; `None` means `min(np, p^2)`.
    pub max_size: Option<usize>,
    /// Probabilities of (add, remove, swap); must sum to one.
    pub move_probs: [f64; 3],
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            steps: 20_000,
            burn_in: 5_000,
            mass_draws: 250,
            seed: 0,
            init: ChainInit::Diagonal,
            max_size: None,
            move_probs: [1.0 / 3.0; 3],
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(EasError::invalid("steps must be positive"));
        }
        if self.burn_in >= self.steps {
            return Err(EasError::invalid(format!(
                "burn_in ({}) must be below steps ({})",
                self.burn_in, self.steps
            )));
        }
        if self.mass_draws == 0 {
            return Err(EasError::invalid("mass_draws must be positive"));
        }
        let sum: f64 = self.move_probs.iter().sum();
        if self.move_probs.iter().any(|w| !(*w >= 0.0) || !w.is_finite())
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(EasError::invalid(format!(
                "move_probs must be nonnegative and sum to 1, got {:?}",
                self.move_probs
            )));
        }
        Ok(())
    }

    /// The size cap actually used for `p` series and `n` transitions.
    pub fn resolve_max_size(&self, p: usize, n: usize) -> Result<usize> {
        let p2 = p * p;
        match self.max_size {
            None => Ok((n * p).min(p2).max(1)),
            Some(m) if (1..=p2).contains(&m) => Ok(m),
            Some(m) => Err(EasError::invalid(format!(
                "max_size {m} outside [1, {p2}]"
            ))),
        }
    }
}

/// Chain output: visit counts past burn-in and their summaries.
#[derive(Debug, Clone)]
pub struct ChainResult {
    pub visits: BTreeMap<Graph, usize>,
    /// Most-visited graph (smallest by graph order on ties).
    pub map_graph: Graph,
    /// Per-edge visit frequency, `inclusion[(j, k)]` for edge `k -> j`.
    pub inclusion: Array2<f64>,
    /// Visit-weighted average of per-graph least-squares estimates.
    pub a_bma: Array2<f64>,
    /// Retained log mass at every step, burn-in included.
    pub log_mass_trace: Vec<f64>,
    pub acceptance_rate: f64,
}

impl ChainResult {
    pub fn total_visits(&self) -> usize {
        self.visits.values().sum()
    }

    /// Visit frequency of one graph past burn-in.
    pub fn visit_frequency(&self, graph: &Graph) -> f64 {
        let total = self.total_visits();
        if total == 0 {
            return 0.0;
        }
        *self.visits.get(graph).unwrap_or(&0) as f64 / total as f64
    }
}

/// Move probabilities with boundary-disabled entries zeroed, plus their sum.
fn boundary_probs(k: usize, p2: usize, max_size: usize, probs: &[f64; 3]) -> ([f64; 3], f64) {
    let mut w = *probs;
    if k >= max_size || k >= p2 {
        w[0] = 0.0;
    }
    if k <= 1 {
        w[1] = 0.0;
    }
    if k == 0 || k >= p2 {
        w[2] = 0.0;
    }
    (w, w[0] + w[1] + w[2])
}

fn nth_active(g: &Graph, mut idx: usize) -> (usize, usize) {
    for (j, row) in g.rows().iter().enumerate() {
        if idx < row.len() {
            return (j, row[idx]);
        }
        idx -= row.len();
    }
    unreachable!("active index out of range")
}

fn nth_inactive(g: &Graph, mut idx: usize) -> (usize, usize) {
    let p = g.p();
    for (j, row) in g.rows().iter().enumerate() {
        let inactive = p - row.len();
        if idx < inactive {
            let mut active = row.iter().peekable();
            for k in 0..p {
                if active.peek() == Some(&&k) {
                    active.next();
                    continue;
                }
                if idx == 0 {
                    return (j, k);
                }
                idx -= 1;
            }
        }
        idx -= inactive;
    }
    unreachable!("inactive index out of range")
}

/// Draw one add/remove/swap candidate and its log Hastings correction
/// `log q(current | candidate) - log q(candidate | current)`.
///
/// Disabled moves are renormalized away on both ends of the correction. When
/// no move is possible at all (only for `p = 1` at its single valid graph)
/// the current graph is returned with correction zero.
pub fn propose<R: rand::Rng>(
    current: &Graph,
    move_probs: &[f64; 3],
    max_size: usize,
    rng: &mut R,
) -> (Graph, f64) {
    let p2 = current.p() * current.p();
    let k = current.size();
    debug_assert!(k >= 1 && k <= max_size);
    let (w, total) = boundary_probs(k, p2, max_size, move_probs);
    if total <= 0.0 {
        return (current.clone(), 0.0);
    }
    let u: f64 = rng.random::<f64>() * total;
    if u < w[0] {
        // add: uniform over inactive entries
        let (j, col) = nth_inactive(current, rng.random_range(0..p2 - k));
        let cand = current.with_entry(j, col).expect("entry was inactive");
        let (w2, t2) = boundary_probs(k + 1, p2, max_size, move_probs);
        let fwd = (w[0] / total) / (p2 - k) as f64;
        let rev = (w2[1] / t2) / (k + 1) as f64;
        (cand, rev.ln() - fwd.ln())
    } else if u < w[0] + w[1] {
        // remove: uniform over active entries
        let (j, col) = nth_active(current, rng.random_range(0..k));
        let cand = current.without_entry(j, col);
        let (w2, t2) = boundary_probs(k - 1, p2, max_size, move_probs);
        let fwd = (w[1] / total) / k as f64;
        let rev = (w2[0] / t2) / (p2 - (k - 1)) as f64;
        (cand, rev.ln() - fwd.ln())
    } else {
        // swap: both directions pick one of k active and one of p2-k
        // inactive entries, so the correction cancels exactly
        let (rj, rk) = nth_active(current, rng.random_range(0..k));
        let (aj, ak) = nth_inactive(current, rng.random_range(0..p2 - k));
        let cand = current
            .without_entry(rj, rk)
            .with_entry(aj, ak)
            .expect("entry was inactive");
        (cand, 0.0)
    }
}

/// A chain run against an arbitrary log-mass oracle: visit counts, MAP
/// graph, retained-mass trace, and acceptance rate. `log_mass` is called
/// once per candidate with a per-step derived seed and must be `-inf` (never
/// `NaN`) for impossible graphs.
pub fn run_chain_over<F>(
    init: Graph,
    cfg: &ChainConfig,
    max_size: usize,
    mut log_mass: F,
) -> Result<RawChain>
where
    F: FnMut(&Graph, u64) -> Result<f64>,
{
    cfg.validate()?;
    if init.size() == 0 || init.size() > max_size {
        return Err(EasError::invalid(format!(
            "initial graph size {} outside [1, {max_size}]",
            init.size()
        )));
    }
    let init_mass = log_mass(&init, rng::derive_seed(cfg.seed, domain::CHAIN_INIT_MASS, 0))?;
    if init_mass == f64::NEG_INFINITY {
        return Err(EasError::degenerate(
            "initial graph has zero estimated mass",
        ));
    }

    let mut move_rng = rng::substream(cfg.seed, domain::CHAIN_PROPOSALS);
    let mut current = init;
    let mut current_mass = init_mass;
    let mut visits: BTreeMap<Graph, usize> = BTreeMap::new();
    let mut trace = Vec::with_capacity(cfg.steps);
    let mut accepted = 0usize;

    for step in 0..cfg.steps {
        let (candidate, correction) = propose(&current, &cfg.move_probs, max_size, &mut move_rng);
        let u: f64 = move_rng.random();
        if candidate != current {
            let mass_seed = rng::derive_seed(cfg.seed, domain::CHAIN_STEP_MASS, step as u64);
            let candidate_mass = log_mass(&candidate, mass_seed)?;
            debug_assert!(!candidate_mass.is_nan());
            let log_ratio = candidate_mass - current_mass + correction;
            // -inf candidates give log_ratio = -inf and u >= 0 > exp(-inf)
            if log_ratio >= 0.0 || u < log_ratio.exp() {
                current = candidate;
                current_mass = candidate_mass;
                accepted += 1;
            }
        }
        trace.push(current_mass);
        if step >= cfg.burn_in {
            *visits.entry(current.clone()).or_insert(0) += 1;
        }
    }

    let map_graph = visits
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(g, _)| g.clone())
        .expect("burn_in < steps leaves at least one visit");
    Ok(RawChain {
        visits,
        map_graph,
        log_mass_trace: trace,
        acceptance_rate: accepted as f64 / cfg.steps as f64,
    })
}

/// Output of [`run_chain_over`], before data-dependent summaries.
#[derive(Debug, Clone)]
pub struct RawChain {
    pub visits: BTreeMap<Graph, usize>,
    pub map_graph: Graph,
    pub log_mass_trace: Vec<f64>,
    pub acceptance_rate: f64,
}

fn bma_from_visits(
    visits: &BTreeMap<Graph, usize>,
    data: &TimeSeriesData,
) -> Result<Array2<f64>> {
    let p = data.p();
    let total: usize = visits.values().sum();
    if total == 0 {
        return Err(EasError::invalid("no visits to average over"));
    }
    let mut a = Array2::<f64>::zeros((p, p));
    for (graph, &count) in visits {
        let fit = least_squares(data, graph)?;
        let weight = count as f64 / total as f64;
        for (j, row) in graph.rows().iter().enumerate() {
            for (idx, &k) in row.iter().enumerate() {
                a[[j, k]] += weight * fit.alpha_hat()[j][idx];
            }
        }
    }
    Ok(a)
}

/// Visit-weighted average of the per-graph least-squares estimates; entries
/// outside a visited graph contribute zero.
pub fn model_average_a(result: &ChainResult, data: &TimeSeriesData) -> Result<Array2<f64>> {
    bma_from_visits(&result.visits, data)
}

fn inclusion_from_visits(visits: &BTreeMap<Graph, usize>, p: usize) -> Array2<f64> {
    let total: usize = visits.values().sum();
    let mut inc = Array2::<f64>::zeros((p, p));
    for (graph, &count) in visits {
        for (j, k) in graph.entries() {
            inc[[j, k]] += count as f64;
        }
    }
    if total > 0 {
        inc.mapv_inplace(|v| v / total as f64);
    }
    inc
}

/// Run the sampler against the fiducial graph mass on `data`.
///
/// The configured initial graph falls back to the diagonal when its own mass
/// estimate is `-inf` (or, for the elastic-net baseline, when the fit is
/// degenerate); a chain with no finite-mass start is an error.
pub fn run_chain(
    data: &TimeSeriesData,
    params: &EasParams,
    cfg: &ChainConfig,
) -> Result<ChainResult> {
    cfg.validate()?;
    params.validate()?;
    let p = data.p();
    let max_size = cfg.resolve_max_size(p, data.n())?;

    let primary = match &cfg.init {
        ChainInit::Diagonal => Some(Graph::diagonal(p)?),
        ChainInit::Explicit(g) => {
            if g.p() != p {
                return Err(EasError::dim(format!(
                    "initial graph is over {} series, data has {p}",
                    g.p()
                )));
            }
            Some(g.clone())
        }
        ChainInit::BaselineGraph => match enet_var(data, &EnetConfig::default()) {
            Ok((_, g)) if g.size() > 0 && g.size() <= max_size => Some(g),
            Ok(_) => None,
            Err(EasError::Degenerate(msg)) => {
                log::warn!("elastic-net init degenerate ({msg}); falling back to diagonal");
                None
            }
            Err(e) => return Err(e),
        },
    };

    let mut candidates = Vec::new();
    if let Some(g) = primary {
        candidates.push(g);
    }
    let diagonal = Graph::diagonal(p)?;
    if candidates.first() != Some(&diagonal) && diagonal.size() <= max_size {
        candidates.push(diagonal);
    }

    let mass = |g: &Graph, seed: u64| {
        log_graph_mass(data, g, params, cfg.mass_draws, seed).map(|e| e.log_mass)
    };

    let mut raw = None;
    for (i, init) in candidates.iter().enumerate() {
        match run_chain_over(init.clone(), cfg, max_size, |g, s| mass(g, s)) {
            Ok(r) => {
                if i > 0 {
                    log::warn!("initial graph had zero mass; started from the diagonal");
                }
                raw = Some(r);
                break;
            }
            Err(EasError::Degenerate(_)) if i + 1 < candidates.len() => continue,
            Err(e) => return Err(e),
        }
    }
    let raw = raw.ok_or_else(|| {
        EasError::degenerate("no starting graph with finite mass; data may be degenerate")
    })?;

    let inclusion = inclusion_from_visits(&raw.visits, p);
    let a_bma = bma_from_visits(&raw.visits, data)?;
    Ok(ChainResult {
        visits: raw.visits,
        map_graph: raw.map_graph,
        inclusion,
        a_bma,
        log_mass_trace: raw.log_mass_trace,
        acceptance_rate: raw.acceptance_rate,
    })
}
