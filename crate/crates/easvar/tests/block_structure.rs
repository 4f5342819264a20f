//! Dense oracles for the blockwise estimation shortcuts.
//!
//! The estimator never materializes the stacked `(np) x |G|` design; these
//! tests do, column-for-column from the Kronecker layout, and compare
//! against naive Gaussian elimination on the stacked system: coefficient
//! solutions, residual norms, the self-calibrating scale, and the stacked
//! Jacobian determinant.

mod common;

use common::{
    dense_solution, kron_design, lu_logdet, random_graph, random_sigma2, rel_err,
    selected_columns, stacked_y,
};
use easvar::data::TimeSeriesData;
use easvar::eas::JacobianVariant;
use easvar::estim::least_squares;
use easvar::gfi::jacobian_logdet;
use easvar::graph::{inv_vec_index, Graph};
use easvar::model::{simulate_var, NoiseScale};
use easvar::patterns::{generate_pattern, PatternKind};
use easvar::rng;
use ndarray::Array2;

fn instance(p: usize, n: usize, seed: u64) -> TimeSeriesData {
    let (a0, _) = generate_pattern(PatternKind::Random, p, seed).unwrap();
    simulate_var(&a0, &NoiseScale::identity(p).unwrap(), n, seed).unwrap()
}

/// Map a flat solution in vec-index order back to (equation, row position).
fn compare_flat_to_fit(flat: &[f64], graph: &Graph, alpha: &[Vec<f64>], tol: f64) {
    for (pos, &idx) in graph.vec_indices().iter().enumerate() {
        let (j1, k1) = inv_vec_index(idx, graph.p()).unwrap();
        let (j, k) = (j1 - 1, k1 - 1);
        let slot = graph.row(j).iter().position(|&c| c == k).unwrap();
        assert!(
            rel_err(alpha[j][slot], flat[pos]) < tol,
            "coefficient ({j}, {k}): block {} vs dense {}",
            alpha[j][slot],
            flat[pos]
        );
    }
}

#[test]
fn dense_least_squares_matches_block_solution() {
    for i in 0..20u64 {
        let p = 2 + (i % 2) as usize;
        let n = 10 + (i % 5) as usize;
        let data = instance(p, n, 300 + i);
        let mut rng = rng::substream(900, i);
        let graph = random_graph(p, 8, p, &mut rng);
        let fit = least_squares(&data, &graph).unwrap();

        let kron = kron_design(&data);
        let y = stacked_y(&data);
        let z = selected_columns(&kron, &graph);
        let flat = dense_solution(&z, &y);
        compare_flat_to_fit(&flat, &graph, fit.alpha_hat(), 1e-8);

        // residual norms: m_j from the dense solution, per equation
        let fitted = z.dot(&Array2::from_shape_vec((flat.len(), 1), flat.clone()).unwrap());
        for j in 0..p {
            let mut m = 0.0;
            for t in 0..n {
                let r = y[t * p + j] - fitted[[t * p + j, 0]];
                m += r * r;
            }
            assert!(
                rel_err(fit.m()[j], m) < 1e-8,
                "equation {j}: m {} vs dense {}",
                fit.m()[j],
                m
            );
        }
    }
}

#[test]
fn lambda_matches_explicit_kronecker_frobenius() {
    for i in 0..10u64 {
        let p = 2 + (i % 3) as usize;
        let n = 12 + (i % 6) as usize;
        let data = instance(p, n, 400 + i);
        let mut rng = rng::substream(901, i);
        let graph = random_graph(p, p * p, p, &mut rng);
        let sigma2 = random_sigma2(p, &mut rng);
        let fit = least_squares(&data, &graph).unwrap();

        let kron = kron_design(&data);
        let z = selected_columns(&kron, &graph);
        let mut frob2 = 0.0;
        for t in 0..data.n() {
            for (j, &s2) in sigma2.iter().enumerate() {
                let row = t * p + j;
                for c in 0..z.ncols() {
                    frob2 += z[[row, c]] * z[[row, c]] / s2;
                }
            }
        }
        assert!(
            rel_err(fit.lambda_with(&sigma2), frob2) < 1e-10,
            "lambda block {} vs kronecker {}",
            fit.lambda_with(&sigma2),
            frob2
        );
    }
}

#[test]
fn full_model_lambda_is_trace_product() {
    for i in 0..5u64 {
        let p = 2 + (i % 3) as usize;
        let data = instance(p, 15, 410 + i);
        let mut rng = rng::substream(902, i);
        let sigma2 = random_sigma2(p, &mut rng);
        let fit = least_squares(&data, &Graph::full(p).unwrap()).unwrap();
        let trace_x: f64 = (0..p).map(|k| data.xxt()[[k, k]]).sum();
        let trace_prec: f64 = sigma2.iter().map(|s| 1.0 / s).sum();
        assert!(rel_err(fit.lambda_with(&sigma2), trace_x * trace_prec) < 1e-10);
    }
}

#[test]
fn jacobian_matches_dense_stacked_determinant() {
    for i in 0..12u64 {
        let p = 2 + (i % 2) as usize;
        let n = 11 + (i % 4) as usize;
        let data = instance(p, n, 500 + i);
        let graph = if i == 0 {
            // one equation left empty: its column is the raw observation
            Graph::from_entries(p, [(0, 0), (0, 1)]).unwrap()
        } else {
            let mut rng = rng::substream(903, i);
            random_graph(p, 8, p, &mut rng)
        };
        let fit = least_squares(&data, &graph).unwrap();

        let kron = kron_design(&data);
        let y = stacked_y(&data);
        let z = selected_columns(&kron, &graph);
        let flat = dense_solution(&z, &y);
        let fitted = z.dot(&Array2::from_shape_vec((flat.len(), 1), flat).unwrap());

        let g = graph.size();
        for variant in [JacobianVariant::Standard, JacobianVariant::NormalizedResiduals] {
            let mut d = Array2::zeros((n * p, g + p));
            d.slice_mut(ndarray::s![.., ..g]).assign(&z);
            for j in 0..p {
                let mut col: Vec<f64> = (0..n)
                    .map(|t| y[t * p + j] - fitted[[t * p + j, 0]])
                    .collect();
                if variant == JacobianVariant::NormalizedResiduals {
                    let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                    for v in &mut col {
                        *v /= norm;
                    }
                }
                for t in 0..n {
                    d[[t * p + j, g + j]] = col[t];
                }
            }
            let gram = d.t().dot(&d);
            let dense = lu_logdet(common::to_rows(&gram)).expect("PD stacked Gram");
            let block = 2.0 * jacobian_logdet(&fit, variant);
            assert!(
                rel_err(block, dense) < 1e-8,
                "instance {i} {variant:?}: block {block} vs dense {dense}"
            );
        }
    }
}
