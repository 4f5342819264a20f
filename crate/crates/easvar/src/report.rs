//! Serializable run reports and DOT rendering of inclusion probabilities.
//!
//! The JSON report is the canonical machine-readable record of a selection
//! run: visit table, MAP graph, inclusion matrix, model-averaged
//! coefficients, metrics, condition verdicts, and a full echo of the
//! configuration that produced them. Everything except the timestamp is a
//! deterministic function of the inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::ArrayView2;
use serde::Serialize;

use crate::bench::{ConditionReport, MetricRecord};
use crate::error::{EasError, Result};
use crate::gimh::ChainResult;

pub const SCHEMA_VERSION: u32 = 1;

/// Inclusion probabilities below this default are left out of DOT output.
pub const DEFAULT_DOT_THRESHOLD: f64 = 0.05;

/// One row of the visit table.
#[derive(Debug, Clone, Serialize)]
pub struct GraphVisit {
    /// Active entries as 1-based column-stacked indices.
    pub edges: Vec<usize>,
    pub count: usize,
    pub frequency: f64,
}

/// Top-level JSON report for one selection run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    /// Unix seconds at report creation; the only nondeterministic field.
    pub timestamp: u64,
    pub seed: u64,
    /// Echo of the resolved configuration, key for key.
    pub config: BTreeMap<String, String>,
    /// MAP graph as 1-based column-stacked indices.
    pub map_graph: Vec<usize>,
    pub map_graph_size: usize,
    pub acceptance_rate: f64,
    /// Visit table sorted by edge list.
    pub visits: Vec<GraphVisit>,
    /// `inclusion[j][k]` is the visit frequency of edge `k -> j`.
    pub inclusion: Vec<Vec<f64>>,
    /// Model-averaged coefficient matrix, row-major.
    pub a_bma: Vec<Vec<f64>>,
    pub metrics: Option<MetricRecord>,
    pub conditions: Option<ConditionReport>,
    pub notes: Vec<String>,
}

fn rows_of(m: &ArrayView2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

impl RunReport {
    /// Assemble a report from a finished chain. Metrics, conditions, and
    /// notes start empty; callers fill what their context provides.
    pub fn from_chain(
        result: &ChainResult,
        seed: u64,
        config: BTreeMap<String, String>,
    ) -> RunReport {
        let total = result.total_visits().max(1);
        let mut visits: Vec<GraphVisit> = result
            .visits
            .iter()
            .map(|(g, &count)| GraphVisit {
                edges: g.vec_indices(),
                count,
                frequency: count as f64 / total as f64,
            })
            .collect();
        visits.sort_by(|a, b| a.edges.cmp(&b.edges));
        RunReport {
            schema_version: SCHEMA_VERSION,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seed,
            config,
            map_graph: result.map_graph.vec_indices(),
            map_graph_size: result.map_graph.size(),
            acceptance_rate: result.acceptance_rate,
            visits,
            inclusion: rows_of(&result.inclusion.view()),
            a_bma: rows_of(&result.a_bma.view()),
            metrics: None,
            conditions: None,
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| EasError::invalid(format!("report serialization failed: {e}")))
    }
}

/// Render an inclusion matrix as a DOT digraph. An edge `k -> j` appears
/// iff `inclusion[(j, k)] >= threshold`, labeled with the probability to
/// two decimals and drawn with width proportional to it. `names` defaults
/// to `x1..xp` and must have length `p` when given.
pub fn inclusion_dot(
    inclusion: &ArrayView2<f64>,
    names: Option<&[String]>,
    threshold: f64,
) -> Result<String> {
    let p = inclusion.nrows();
    if inclusion.ncols() != p {
        return Err(EasError::dim(format!(
            "inclusion matrix must be square, got {}x{}",
            p,
            inclusion.ncols()
        )));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EasError::invalid(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    if let Some(names) = names {
        if names.len() != p {
            return Err(EasError::dim(format!(
                "{} names for {p} series",
                names.len()
            )));
        }
    }
    let name = |i: usize| -> String {
        match names {
            Some(ns) => ns[i].clone(),
            None => format!("x{}", i + 1),
        }
    };
    let mut out = String::from("digraph inclusion {\n");
    for i in 0..p {
        let _ = writeln!(out, "  \"{}\";", name(i));
    }
    // source-major order keeps the output deterministic
    for k in 0..p {
        for j in 0..p {
            let prob = inclusion[[j, k]];
            if prob >= threshold {
                let _ = writeln!(
                    out,
                    "  \"{}\" -> \"{}\" [label=\"{:.2}\", penwidth={:.2}];",
                    name(k),
                    name(j),
                    prob,
                    5.0 * prob
                );
            }
        }
    }
    out.push_str("}\n");
    Ok(out)
}
