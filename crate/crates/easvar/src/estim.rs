//! Per-graph least squares.
//!
//! With diagonal noise, the stacked regression of `vec(Y)` on the design
//! `Z_G` decomposes by equation: the Gram matrix `Z_G' W^{-1} Z_G` is block
//! diagonal with blocks `(X X')_{r_j, r_j} / sigma_j^2`, so the least-squares
//! coefficients, residual sums of squares `m_j`, log-determinants, and the
//! diagonals of the squared-block inverses (needed by the admissibility
//! statistic) are all computed per equation on `|r_j| x |r_j|` matrices, and
//! never on the `p^2`-sized stacked system.

use ndarray::Array2;

use crate::data::TimeSeriesData;
use crate::error::{EasError, Result};
use crate::graph::Graph;
use crate::linalg::{cholesky, Chol, PIVOT_REL_TOL};
use crate::model::{NoiseScale, TransitionMatrix};

/// Least-squares fit of one graph: per-equation coefficients and the cached
/// block quantities every downstream mass computation needs.
#[derive(Debug, Clone)]
pub struct GraphFit {
    graph: Graph,
    n: usize,
    alpha_hat: Vec<Vec<f64>>,
    m: Vec<f64>,
    gram_blocks: Vec<Array2<f64>>,
    chol_blocks: Vec<Option<Chol>>,
    logdet_blocks: Vec<f64>,
    trace_blocks: Vec<f64>,
    bsq_inv_diag: Vec<Vec<f64>>,
}

/// Fit `graph` to `data` by per-equation least squares.
///
/// Equations with an empty predictor set contribute `m_j = ||Y_j||^2`, no
/// Gram block, and log-determinant zero. A block whose Cholesky pivot falls
/// below the relative threshold makes the whole graph rank-deficient.
pub fn least_squares(data: &TimeSeriesData, graph: &Graph) -> Result<GraphFit> {
    let p = data.p();
    if graph.p() != p {
        return Err(EasError::dim(format!(
            "graph dimension {} does not match data dimension {p}",
            graph.p()
        )));
    }
    let xxt = data.xxt();
    let xyt = data.xyt();
    let mut alpha_hat = Vec::with_capacity(p);
    let mut m = Vec::with_capacity(p);
    let mut gram_blocks = Vec::with_capacity(p);
    let mut chol_blocks = Vec::with_capacity(p);
    let mut logdet_blocks = Vec::with_capacity(p);
    let mut trace_blocks = Vec::with_capacity(p);
    let mut bsq_inv_diag = Vec::with_capacity(p);

    for j in 0..p {
        let r = graph.row(j);
        let k = r.len();
        if k == 0 {
            alpha_hat.push(Vec::new());
            m.push(data.yy()[j]);
            gram_blocks.push(Array2::zeros((0, 0)));
            chol_blocks.push(None);
            logdet_blocks.push(0.0);
            trace_blocks.push(0.0);
            bsq_inv_diag.push(Vec::new());
            continue;
        }
        let mut block = Array2::<f64>::zeros((k, k));
        for (a, &ra) in r.iter().enumerate() {
            for (b, &rb) in r.iter().enumerate() {
                block[[a, b]] = xxt[[ra, rb]];
            }
        }
        let chol = cholesky(&block.view(), PIVOT_REL_TOL).map_err(|e| EasError::RankDeficient {
            equation: j,
            detail: e.to_string(),
        })?;
        let mut coef: Vec<f64> = r.iter().map(|&ri| xyt[[ri, j]]).collect();
        chol.solve_in_place(&mut coef);

        // residual computed explicitly: robust when the fit is near exact
        let mut resid = data.y().row(j).to_owned();
        for (idx, &ri) in r.iter().enumerate() {
            resid.scaled_add(-coef[idx], &data.x().row(ri));
        }
        let mj = resid.dot(&resid);

        let trace = (0..k).map(|i| block[[i, i]]).sum();
        let inv = chol.inverse();
        // diag((B^2)^{-1}) = diag((B^{-1})^2); row sums of squares by symmetry
        let diag: Vec<f64> = (0..k)
            .map(|i| (0..k).map(|c| inv[[i, c]] * inv[[i, c]]).sum())
            .collect();

        alpha_hat.push(coef);
        m.push(mj);
        logdet_blocks.push(chol.logdet());
        trace_blocks.push(trace);
        bsq_inv_diag.push(diag);
        gram_blocks.push(block);
        chol_blocks.push(Some(chol));
    }

    Ok(GraphFit {
        graph: graph.clone(),
        n: data.n(),
        alpha_hat,
        m,
        gram_blocks,
        chol_blocks,
        logdet_blocks,
        trace_blocks,
        bsq_inv_diag,
    })
}

impl GraphFit {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Per-equation coefficients, aligned with `graph.row(j)`.
    pub fn alpha_hat(&self) -> &[Vec<f64>] {
        &self.alpha_hat
    }

    /// Residual sums of squares `m_j`.
    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn gram_block(&self, j: usize) -> &Array2<f64> {
        &self.gram_blocks[j]
    }

    pub fn chol_block(&self, j: usize) -> Option<&Chol> {
        self.chol_blocks[j].as_ref()
    }

    /// `log |(X X')_{r_j, r_j}|` per equation (zero for empty equations).
    pub fn logdet_blocks(&self) -> &[f64] {
        &self.logdet_blocks
    }

    /// `tr((X X')_{r_j, r_j})` per equation.
    pub fn trace_blocks(&self) -> &[f64] {
        &self.trace_blocks
    }

    /// `diag(((X X')_{r_j, r_j})^{-2})` per equation; scaling by
    /// `sigma_j^4` turns these into the squared-inverse diagonals of the
    /// noise-weighted blocks.
    pub fn bsq_inv_diag(&self) -> &[Vec<f64>] {
        &self.bsq_inv_diag
    }

    pub fn min_m(&self) -> f64 {
        self.m.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The coefficients as a dense `p x p` matrix, zero off the graph.
    pub fn coefficient_matrix(&self) -> Result<TransitionMatrix> {
        let p = self.p();
        let mut a = Array2::<f64>::zeros((p, p));
        for j in 0..p {
            for (idx, &k) in self.graph.row(j).iter().enumerate() {
                a[[j, k]] = self.alpha_hat[j][idx];
            }
        }
        TransitionMatrix::sparse(a, &self.graph)
    }

    /// `Lambda_g = sum_j tr((X X')_{r_j, r_j}) / sigma_j^2` for arbitrary
    /// variance slices (the per-draw path of the mass estimator).
    pub fn lambda_with(&self, sigma2: &[f64]) -> f64 {
        self.trace_blocks
            .iter()
            .zip(sigma2)
            .map(|(t, s)| t / s)
            .sum()
    }
}

/// `Lambda_g = ||W^{-1/2} Z_G||_F^2`, evaluated blockwise.
pub fn lambda_g(fit: &GraphFit, noise: &NoiseScale) -> Result<f64> {
    if noise.p() != fit.p() {
        return Err(EasError::dim(format!(
            "noise dimension {} does not match fit dimension {}",
            noise.p(),
            fit.p()
        )));
    }
    Ok(fit.lambda_with(noise.sigma2()))
}

/// `min_j m_j` of a fit.
pub fn rss_min(fit: &GraphFit) -> f64 {
    fit.min_m()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_var, TransitionMatrix};
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};

    #[test]
    fn scalar_normal_equations() {
        // p=1 series 0, 1, 2, 4: x = (0,1,2), y = (1,2,4)
        let data = TimeSeriesData::from_series(array![[0.0, 1.0, 2.0, 4.0]]).unwrap();
        let fit = least_squares(&data, &Graph::full(1).unwrap()).unwrap();
        let want = (0.0 * 1.0 + 1.0 * 2.0 + 2.0 * 4.0) / (1.0 + 4.0);
        assert_relative_eq!(fit.alpha_hat()[0][0], want, epsilon = 1e-14);
        // residual recomputed by hand
        let m_want: f64 = [1.0 - 0.0, 2.0 - want, 4.0 - 2.0 * want]
            .iter()
            .map(|r| r * r)
            .sum();
        assert_relative_eq!(fit.m()[0], m_want, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_data_recovers_coefficients() {
        let a = array![[0.5, 0.2], [0.0, -0.4]];
        let mut series = Array2::<f64>::zeros((2, 9));
        series[[0, 0]] = 1.0;
        series[[1, 0]] = -2.0;
        for t in 1..9 {
            for j in 0..2 {
                series[[j, t]] = (0..2).map(|k| a[[j, k]] * series[[k, t - 1]]).sum();
            }
        }
        let data = TimeSeriesData::from_series(series).unwrap();
        let g = Graph::from_entries(2, [(0, 0), (0, 1), (1, 1)]).unwrap();
        let fit = least_squares(&data, &g).unwrap();
        let ahat = fit.coefficient_matrix().unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert!(
                    (ahat.matrix()[[j, k]] - a[[j, k]]).abs() < 1e-8,
                    "entry ({j},{k})"
                );
            }
        }
        assert!(fit.min_m() >= 0.0);
        assert!(fit.min_m() < 1e-12);
    }

    #[test]
    fn empty_equation_uses_response_norm() {
        let data = TimeSeriesData::from_series(array![[0.0, 1.0, 2.0], [0.0, 3.0, -1.0]]).unwrap();
        let g = Graph::from_entries(2, [(0, 0)]).unwrap();
        let fit = least_squares(&data, &g).unwrap();
        assert_relative_eq!(fit.m()[1], data.yy()[1], epsilon = 1e-14);
        assert_eq!(fit.logdet_blocks()[1], 0.0);
        assert!(fit.alpha_hat()[1].is_empty());
    }

    #[test]
    fn duplicate_predictors_are_rank_deficient() {
        // two identical series rows
        let series = array![[0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 2.0, 3.0]];
        let data = TimeSeriesData::from_series(series).unwrap();
        let g = Graph::from_entries(2, [(0, 0), (0, 1)]).unwrap();
        match least_squares(&data, &g) {
            Err(EasError::RankDeficient { equation, .. }) => assert_eq!(equation, 0),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn nested_graphs_have_monotone_rss() {
        let a = TransitionMatrix::new(array![[0.5, 0.2, 0.0], [0.1, -0.3, 0.2], [0.0, 0.0, 0.4]])
            .unwrap();
        let noise = NoiseScale::identity(3).unwrap();
        let data = simulate_var(&a, &noise, 25, 13).unwrap();
        let small = Graph::diagonal(3).unwrap();
        let mut grow = small.clone();
        for (j, k) in [(0, 1), (1, 2), (2, 0), (1, 0)] {
            let bigger = grow.with_entry(j, k).unwrap();
            let f_small = least_squares(&data, &grow).unwrap();
            let f_big = least_squares(&data, &bigger).unwrap();
            for eq in 0..3 {
                assert!(
                    f_big.m()[eq] <= f_small.m()[eq] + 1e-10 * f_small.m()[eq].max(1.0),
                    "m increased for equation {eq} when adding ({j},{k})"
                );
            }
            grow = bigger;
        }
    }

    #[test]
    fn lambda_full_graph_is_trace_product() {
        let a = TransitionMatrix::new(array![[0.3, 0.1], [0.0, 0.4]]).unwrap();
        let noise = NoiseScale::new(vec![0.5, 2.0]).unwrap();
        let data = simulate_var(&a, &noise, 30, 21).unwrap();
        let fit = least_squares(&data, &Graph::full(2).unwrap()).unwrap();
        let lam = lambda_g(&fit, &noise).unwrap();
        let tr_xxt = data.xxt()[[0, 0]] + data.xxt()[[1, 1]];
        let tr_sigma_inv = 1.0 / 0.5 + 1.0 / 2.0;
        assert_relative_eq!(lam, tr_xxt * tr_sigma_inv, epsilon = 1e-10 * lam);
    }

    #[test]
    fn lambda_adds_over_equations() {
        let a = TransitionMatrix::new(array![[0.3, 0.1], [0.0, 0.4]]).unwrap();
        let noise = NoiseScale::new(vec![1.0, 3.0]).unwrap();
        let data = simulate_var(&a, &noise, 20, 2).unwrap();
        let g = Graph::from_entries(2, [(0, 0), (0, 1), (1, 0)]).unwrap();
        let fit = least_squares(&data, &g).unwrap();
        let eq0 = Graph::from_entries(2, [(0, 0), (0, 1)]).unwrap();
        let eq1 = Graph::from_entries(2, [(1, 0)]).unwrap();
        let f0 = least_squares(&data, &eq0).unwrap();
        let f1 = least_squares(&data, &eq1).unwrap();
        let total = lambda_g(&fit, &noise).unwrap();
        let parts = fit.trace_blocks()[0] / 1.0 + fit.trace_blocks()[1] / 3.0;
        assert_relative_eq!(total, parts, epsilon = 1e-12 * total);
        assert_relative_eq!(
            total,
            f0.trace_blocks()[0] / 1.0 + f1.trace_blocks()[1] / 3.0,
            epsilon = 1e-12 * total
        );
    }

    #[test]
    fn squared_inverse_diagonal_matches_dense() {
        let a = TransitionMatrix::new(array![[0.5, 0.2, 0.0], [0.1, -0.3, 0.2], [0.0, 0.0, 0.4]])
            .unwrap();
        let data = simulate_var(&a, &NoiseScale::identity(3).unwrap(), 18, 5).unwrap();
        let g = Graph::from_entries(3, [(0, 0), (0, 1), (0, 2), (1, 1), (2, 0), (2, 2)]).unwrap();
        let fit = least_squares(&data, &g).unwrap();
        for j in 0..3 {
            let b = fit.gram_block(j);
            if b.nrows() == 0 {
                continue;
            }
            let b2 = b.dot(b);
            let ch = cholesky(&b2.view(), 0.0).unwrap();
            let inv = ch.inverse();
            for i in 0..b.nrows() {
                assert_relative_eq!(
                    fit.bsq_inv_diag()[j][i],
                    inv[[i, i]],
                    max_relative = 1e-9
                );
            }
        }
    }
}
