//! Synthetic transition-matrix patterns.
//!
//! Five sparsity designs for benchmark data. Every pattern activates all `p`
//! diagonal entries. Off-diagonal structure:
//!
//! - `Band`: every entry with `|j - k| = 1` is active.
//! - `Cluster`: `ceil(p/5)` contiguous diagonal blocks of near-equal size;
//!   within-block off-diagonals activate independently with probability 0.01.
//! - `Hub`: `ceil(p/10)` hub nodes, one per contiguous group; each hub is
//!   connected in both directions to the next `min(8, group size - 1)`
//!   members of its group.
//! - `Random`: every off-diagonal activates independently with
//!   probability 0.01.
//! - `ScaleFree`: a preferential-attachment tree over the `p` nodes; both
//!   directions of each tree edge are active.
//!
//! Active diagonal values are drawn `N(+-12, 1)`, off-diagonals `N(+-3, 1)`,
//! signs fair coins, and the matrix is rescaled to spectral norm 0.5, so
//! every generated model is stable.
//!
//! Randomness is consumed in a frozen order: structure choices first
//! (attachment targets for `ScaleFree`; activation coins in row-major entry
//! order for `Cluster` and `Random`), then one sign coin and one normal draw
//! per active entry in row-major order.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{EasError, Result};
use crate::graph::Graph;
use crate::model::TransitionMatrix;
use crate::rng;

const DIAG_MEAN: f64 = 12.0;
const OFFDIAG_MEAN: f64 = 3.0;
const ACTIVATION_PROB: f64 = 0.01;
const TARGET_NORM: f64 = 0.5;
const CLUSTER_BLOCK: usize = 5;
const HUB_GROUP: usize = 10;
const HUB_MAX_DEGREE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternKind {
    Band,
    Cluster,
    Hub,
    Random,
    ScaleFree,
}

impl PatternKind {
    pub const ALL: [PatternKind; 5] = [
        PatternKind::Band,
        PatternKind::Cluster,
        PatternKind::Hub,
        PatternKind::Random,
        PatternKind::ScaleFree,
    ];
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PatternKind::Band => "band",
            PatternKind::Cluster => "cluster",
            PatternKind::Hub => "hub",
            PatternKind::Random => "random",
            PatternKind::ScaleFree => "scale-free",
        };
        f.write_str(name)
    }
}

impl FromStr for PatternKind {
    type Err = EasError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "band" => Ok(PatternKind::Band),
            "cluster" => Ok(PatternKind::Cluster),
            "hub" => Ok(PatternKind::Hub),
            "random" => Ok(PatternKind::Random),
            "scale-free" | "scalefree" | "scale_free" => Ok(PatternKind::ScaleFree),
            other => Err(EasError::invalid(format!(
                "unknown pattern '{other}' (expected band, cluster, hub, random, or scale-free)"
            ))),
        }
    }
}

/// Split `0..p` into `groups` contiguous near-equal ranges.
fn partition(p: usize, groups: usize) -> Vec<std::ops::Range<usize>> {
    let base = p / groups;
    let rem = p % groups;
    let mut out = Vec::with_capacity(groups);
    let mut start = 0;
    for g in 0..groups {
        let len = base + usize::from(g < rem);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Generate a sparse stable transition matrix and its graph.
pub fn generate_pattern(
    kind: PatternKind,
    p: usize,
    seed: u64,
) -> Result<(TransitionMatrix, Graph)> {
    if p < 2 {
        return Err(EasError::invalid("pattern generation needs p >= 2"));
    }
    let mut rng = rng::substream(seed, rng::domain::PATTERN);

    let graph = match kind {
        PatternKind::Band => Graph::from_entries(
            p,
            (0..p).flat_map(|j| {
                (0..p).filter(move |&k| j.abs_diff(k) <= 1).map(move |k| (j, k))
            }),
        )?,
        PatternKind::Cluster => {
            let blocks = partition(p, p.div_ceil(CLUSTER_BLOCK));
            let mut entries = Vec::new();
            for j in 0..p {
                let block = blocks.iter().find(|b| b.contains(&j)).unwrap().clone();
                for k in 0..p {
                    // Short-circuit keeps the diagonal from consuming a draw.
                    if j == k || (block.contains(&k) && rng.random_bool(ACTIVATION_PROB)) {
                        entries.push((j, k));
                    }
                }
            }
            Graph::from_entries(p, entries)?
        }
        PatternKind::Hub => {
            let groups = partition(p, p.div_ceil(HUB_GROUP));
            let mut entries: Vec<(usize, usize)> = (0..p).map(|j| (j, j)).collect();
            for group in groups {
                let hub = group.start;
                let degree = HUB_MAX_DEGREE.min(group.len().saturating_sub(1));
                for member in group.start + 1..=group.start + degree {
                    entries.push((hub, member));
                    entries.push((member, hub));
                }
            }
            Graph::from_entries(p, entries)?
        }
        PatternKind::Random => {
            let mut entries = Vec::new();
            for j in 0..p {
                for k in 0..p {
                    if j == k || rng.random_bool(ACTIVATION_PROB) {
                        entries.push((j, k));
                    }
                }
            }
            Graph::from_entries(p, entries)?
        }
        PatternKind::ScaleFree => {
            // Preferential attachment, one edge per new node. `endpoints`
            // lists every edge endpoint so far, so a uniform pick from it is
            // a degree-proportional pick.
            let mut entries: Vec<(usize, usize)> = (0..p).map(|j| (j, j)).collect();
            let mut endpoints: Vec<usize> = vec![0, 1];
            entries.push((0, 1));
            entries.push((1, 0));
            for v in 2..p {
                let target = endpoints[rng.random_range(0..endpoints.len())];
                entries.push((v, target));
                entries.push((target, v));
                endpoints.push(target);
                endpoints.push(v);
            }
            Graph::from_entries(p, entries)?
        }
    };

    let mut a = Array2::<f64>::zeros((p, p));
    for (j, k) in graph.entries() {
        let mean = if j == k { DIAG_MEAN } else { OFFDIAG_MEAN };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let z: f64 = rng.sample(StandardNormal);
        a[[j, k]] = sign * mean + z;
    }
    let a = crate::linalg::rescale_to(&a.view(), TARGET_NORM)?;
    let tm = TransitionMatrix::sparse(a, &graph)?;
    Ok((tm, graph))
}
