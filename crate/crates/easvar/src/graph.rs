//! Graphs over transition-matrix entries and the vec-index convention.
//!
//! A graph is the set of active entries `(j, k)` of the `p x p` transition
//! matrix: entry `(j, k)` means series `k` enters the regression of series
//! `j` (equation `j` is row `j` of `A`). The per-equation predictor sets
//! `r_j = {k : (j, k) active}` are the grouping under which the stacked
//! regression decomposes into independent per-equation blocks, and they are
//! the representation stored here.
//!
//! Linear "vec" indices follow column stacking of `A`: the 1-based entry
//! `(j, k)` maps to `(k-1)*p + j`, so indices run down columns. All other
//! row/column arguments in this API are 0-based.

use ndarray::ArrayView2;

use crate::error::{EasError, Result};

/// Column-stacked linear index of the 1-based entry `(j, k)`: `(k-1)*p + j`.
pub fn vec_index(j: usize, k: usize, p: usize) -> Result<usize> {
    if j < 1 || j > p || k < 1 || k > p {
        return Err(EasError::invalid(format!(
            "vec_index expects 1 <= j,k <= p, got (j={j}, k={k}, p={p})"
        )));
    }
    Ok((k - 1) * p + j)
}

/// Inverse of [`vec_index`]: recovers the 1-based `(j, k)` from a linear
/// index in `1..=p*p`.
pub fn inv_vec_index(index: usize, p: usize) -> Result<(usize, usize)> {
    if index < 1 || index > p * p {
        return Err(EasError::invalid(format!(
            "vec index {index} out of range 1..={}",
            p * p
        )));
    }
    let k = (index - 1) / p + 1;
    let j = (index - 1) % p + 1;
    Ok((j, k))
}

/// A set of active transition-matrix entries, stored as sorted per-equation
/// predictor sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Graph {
    p: usize,
    rows: Vec<Vec<usize>>,
}

impl Graph {
    pub fn empty(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(EasError::invalid("graph dimension p must be positive"));
        }
        Ok(Graph {
            p,
            rows: vec![Vec::new(); p],
        })
    }

    /// The graph of all `p` diagonal entries.
    pub fn diagonal(p: usize) -> Result<Self> {
        let mut g = Graph::empty(p)?;
        for j in 0..p {
            g.rows[j].push(j);
        }
        Ok(g)
    }

    pub fn full(p: usize) -> Result<Self> {
        let mut g = Graph::empty(p)?;
        for j in 0..p {
            g.rows[j] = (0..p).collect();
        }
        Ok(g)
    }

    /// Build from 0-based `(row j, col k)` entries; duplicates collapse.
    pub fn from_entries<I>(p: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Graph::empty(p)?;
        for (j, k) in entries {
            if j >= p || k >= p {
                return Err(EasError::invalid(format!(
                    "entry ({j}, {k}) out of range for p={p}"
                )));
            }
            if let Err(pos) = g.rows[j].binary_search(&k) {
                g.rows[j].insert(pos, k);
            }
        }
        Ok(g)
    }

    /// Build from 1-based linear vec indices (the inverse of
    /// [`Graph::vec_indices`]).
    pub fn from_vec_indices(p: usize, indices: &[usize]) -> Result<Self> {
        let entries = indices
            .iter()
            .map(|&i| inv_vec_index(i, p).map(|(j, k)| (j - 1, k - 1)))
            .collect::<Result<Vec<_>>>()?;
        Graph::from_entries(p, entries)
    }

    /// The support (exact nonzeros) of a square matrix.
    pub fn from_support(a: &ArrayView2<f64>) -> Result<Self> {
        let p = a.nrows();
        if a.ncols() != p {
            return Err(EasError::dim(format!(
                "support expects a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        Graph::from_entries(
            p,
            (0..p).flat_map(|j| (0..p).filter(move |&k| a[[j, k]] != 0.0).map(move |k| (j, k))),
        )
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of active entries `|G|`.
    pub fn size(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Predictor set `r_j` (sorted, 0-based columns).
    pub fn row(&self, j: usize) -> &[usize] {
        &self.rows[j]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn contains(&self, j: usize, k: usize) -> bool {
        j < self.p && self.rows[j].binary_search(&k).is_ok()
    }

    /// Active entries as 0-based `(j, k)`, ordered by equation then column.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(j, r)| r.iter().map(move |&k| (j, k)))
    }

    /// Active entries as ascending 1-based vec indices.
    pub fn vec_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .entries()
            .map(|(j, k)| k * self.p + j + 1)
            .collect();
        v.sort_unstable();
        v
    }

    /// Copy with the 0-based entry `(j, k)` active (no-op when present).
    pub fn with_entry(&self, j: usize, k: usize) -> Result<Self> {
        if j >= self.p || k >= self.p {
            return Err(EasError::invalid(format!(
                "entry ({j}, {k}) out of range for p={}",
                self.p
            )));
        }
        let mut g = self.clone();
        if let Err(pos) = g.rows[j].binary_search(&k) {
            g.rows[j].insert(pos, k);
        }
        Ok(g)
    }

    /// Copy with the 0-based entry `(j, k)` inactive (no-op when absent).
    pub fn without_entry(&self, j: usize, k: usize) -> Self {
        let mut g = self.clone();
        if j < g.p {
            if let Ok(pos) = g.rows[j].binary_search(&k) {
                g.rows[j].remove(pos);
            }
        }
        g
    }

    pub fn is_subset_of(&self, other: &Graph) -> bool {
        self.p == other.p
            && self
                .entries()
                .all(|(j, k)| other.contains(j, k))
    }
}
