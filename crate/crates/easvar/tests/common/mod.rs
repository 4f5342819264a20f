//! Naive dense linear algebra and instance generators shared by the
//! integration suites. Everything here is written from scratch so the
//! library's blockwise shortcuts are checked against an independent path.
#![allow(dead_code)]
// Elimination updates read one row while mutating another, which rules out
// the iterator form clippy suggests for these index loops.
#![allow(clippy::needless_range_loop)]

use easvar::graph::Graph;
use easvar::rng;
use ndarray::Array2;
use rand::Rng;

/// Gaussian elimination with partial pivoting; `None` on a vanishing pivot.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| {
            a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap()
        })?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

/// `ln det` of a matrix with positive determinant, by LU with partial
/// pivoting; `None` on singular or nonpositive determinant.
pub fn lu_logdet(mut a: Vec<Vec<f64>>) -> Option<f64> {
    let n = a.len();
    let mut log = 0.0;
    let mut positive = true;
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| {
            a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap()
        })?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            a.swap(col, piv);
            positive = !positive;
        }
        log += a[col][col].abs().ln();
        if a[col][col] < 0.0 {
            positive = !positive;
        }
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    positive.then_some(log)
}

pub fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Relative gap with an absolute floor of 1.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

/// Random nonempty graph with at most `max_size` entries and at most
/// `max_row` per equation.
pub fn random_graph<R: Rng>(p: usize, max_size: usize, max_row: usize, rng: &mut R) -> Graph {
    loop {
        let mut g = Graph::empty(p).unwrap();
        for j in 0..p {
            for k in 0..p {
                if g.size() < max_size && g.row(j).len() < max_row && rng.random::<f64>() < 0.5 {
                    g = g.with_entry(j, k).unwrap();
                }
            }
        }
        if g.size() > 0 {
            return g;
        }
    }
}

pub fn random_sigma2<R: Rng>(p: usize, rng: &mut R) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(0.5..2.0)).collect()
}

/// Deterministic per-instance stream for test fixtures.
pub fn fixture_rng(seed: u64, index: u64) -> rand_chacha::ChaCha20Rng {
    rng::substream(seed, index)
}

/// Full Kronecker design: column `(k)p + j` (zero-based) carries predictor
/// `k` of equation `j`, rows are stacked observation-major.
pub fn kron_design(data: &easvar::TimeSeriesData) -> Array2<f64> {
    let (p, n) = (data.p(), data.n());
    let x = data.x();
    let mut k = Array2::zeros((n * p, p * p));
    for t in 0..n {
        for j in 0..p {
            for pred in 0..p {
                k[[t * p + j, pred * p + j]] = x[[pred, t]];
            }
        }
    }
    k
}

/// Observations stacked to match [`kron_design`] rows.
pub fn stacked_y(data: &easvar::TimeSeriesData) -> Vec<f64> {
    let (p, n) = (data.p(), data.n());
    let y = data.y();
    let mut out = vec![0.0; n * p];
    for t in 0..n {
        for j in 0..p {
            out[t * p + j] = y[[j, t]];
        }
    }
    out
}

/// Columns of the Kronecker design selected by a graph's vec indices.
pub fn selected_columns(kron: &Array2<f64>, graph: &Graph) -> Array2<f64> {
    let rows = kron.nrows();
    let idx = graph.vec_indices();
    let mut z = Array2::zeros((rows, idx.len()));
    for (c, &i) in idx.iter().enumerate() {
        z.column_mut(c).assign(&kron.column(i - 1));
    }
    z
}

/// Dense least squares on a stacked design via naive elimination.
pub fn dense_solution(z: &Array2<f64>, y: &[f64]) -> Vec<f64> {
    let zty: Vec<f64> = (0..z.ncols())
        .map(|c| z.column(c).iter().zip(y).map(|(a, b)| a * b).sum())
        .collect();
    let ztz = z.t().dot(z);
    gauss_solve(to_rows(&ztz), zty).expect("test design is full rank")
}

/// Brute-force drop-one quadratic: for each coordinate `i`, minimize
/// `(alpha - beta)' Q (alpha - beta)` over `beta` with `beta_i = 0` by
/// solving the reduced normal equations densely; return the minimum over
/// `i`. `Q` is the full metric, no block shortcuts.
pub fn schur_constrained_min(q: &Array2<f64>, alpha: &[f64]) -> f64 {
    let m = alpha.len();
    let mut best = f64::INFINITY;
    for i in 0..m {
        let free: Vec<usize> = (0..m).filter(|&c| c != i).collect();
        let qii = q[[i, i]];
        let s = if free.is_empty() {
            qii
        } else {
            let qff: Vec<Vec<f64>> = free
                .iter()
                .map(|&r| free.iter().map(|&c| q[[r, c]]).collect())
                .collect();
            let qfi: Vec<f64> = free.iter().map(|&r| q[[r, i]]).collect();
            let x = gauss_solve(qff, qfi.clone()).expect("PD metric");
            qii - qfi.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
        };
        best = best.min(alpha[i] * alpha[i] * s);
    }
    best
}

/// Embed per-equation blocks into one dense block-diagonal matrix.
pub fn block_diag(blocks: &[Array2<f64>]) -> Array2<f64> {
    let total: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Array2::zeros((total, total));
    let mut at = 0;
    for b in blocks {
        let k = b.nrows();
        out.slice_mut(ndarray::s![at..at + k, at..at + k]).assign(b);
        at += k;
    }
    out
}
