//! Dense symmetric kernels: Cholesky factorization, Jacobi eigenvalues,
//! spectral norms.
//!
//! Everything here operates on small matrices (per-equation Gram blocks of
//! size `|r_j| <= p`, stability checks on `p x p` transition matrices), so
//! the kernels favour exactness and predictable behaviour over asymptotic
//! speed. The Jacobi eigensolver in particular has no convergence corner
//! cases on symmetric input and backs both the minimum eigenvalue needed by
//! the condition checkers and the exact fallback of the stability test.

use ndarray::{Array2, ArrayView2};

use crate::error::{EasError, Result};

/// Relative Cholesky pivot threshold: a block is treated as rank-deficient
/// when a pivot falls at or below this fraction of the block trace.
pub const PIVOT_REL_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Chol {
    l: Array2<f64>,
}

/// Factor `a = L L'` with a relative pivot test.
///
/// Fails with `Degenerate` when a pivot (the diagonal remainder before its
/// square root) is not strictly greater than `rel_tol * trace(a)`; callers
/// that need a per-equation error wrap this into `RankDeficient`.
pub fn cholesky(a: &ArrayView2<f64>, rel_tol: f64) -> Result<Chol> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(EasError::dim(format!(
            "cholesky expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let trace: f64 = (0..n).map(|i| a[[i, i]]).sum();
    let floor = rel_tol * trace;
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        for i in j..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > floor) || !s.is_finite() {
                    return Err(EasError::degenerate(format!(
                        "cholesky pivot {s:.3e} at column {j} below tolerance {floor:.3e}"
                    )));
                }
                l[[j, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(Chol { l })
}

impl Chol {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `log det(a)` of the factored matrix.
    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[[i, i]].ln()).sum::<f64>()
    }

    /// Solve `a x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[[i, k]] * b[k];
            }
            b[i] = s / self.l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[[k, i]] * b[k];
            }
            b[i] = s / self.l[[i, i]];
        }
    }

    /// Solve `L' x = z` in place (back substitution on the transposed
    /// factor). With `z` standard normal, `x` has covariance `a^{-1}`.
    pub fn solve_lt_in_place(&self, z: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(z.len(), n);
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= self.l[[k, i]] * z[k];
            }
            z[i] = s / self.l[[i, i]];
        }
    }

    /// Inverse of the factored matrix.
    pub fn inverse(&self) -> Array2<f64> {
        let n = self.dim();
        let mut inv = Array2::<f64>::zeros((n, n));
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[[i, j]] = col[i];
            }
        }
        inv
    }
}

/// All eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi
/// rotations. Input symmetry is the caller's responsibility (the routine
/// reads both triangles).
pub fn sym_eigenvalues(a: &ArrayView2<f64>) -> Vec<f64> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    if n == 0 {
        return Vec::new();
    }
    let mut m = a.to_owned();
    let scale = frobenius_norm(&m.view()).max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = m[[i, p]];
                    let aiq = m[[i, q]];
                    m[[i, p]] = c * aip - s * aiq;
                    m[[i, q]] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = m[[p, i]];
                    let aqi = m[[q, i]];
                    m[[p, i]] = c * api - s * aqi;
                    m[[q, i]] = s * api + c * aqi;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

/// Largest singular value `||a||_2 = sqrt(lambda_max(a'a))` by power
/// iteration on `a'a` with a deterministic start, Rayleigh-quotient
/// convergence test, and an iteration cap.
pub fn spectral_norm(a: &ArrayView2<f64>) -> f64 {
    let (r, c) = (a.nrows(), a.ncols());
    if r == 0 || c == 0 {
        return 0.0;
    }
    let s = gram(a);
    let n = c;
    // Deterministic start with a mild ramp so it is never exactly orthogonal
    // to the dominant eigenvector of a structured matrix.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 1e-3 * i as f64).collect();
    normalize(&mut v);
    let mut rq_prev = f64::NEG_INFINITY;
    let mut y = vec![0.0; n];
    for _ in 0..50_000 {
        mat_vec(&s, &v, &mut y);
        let rq: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ny: f64 = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        if ny == 0.0 {
            return 0.0;
        }
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = yi / ny;
        }
        if (rq - rq_prev).abs() <= 1e-14 * rq.abs().max(1.0) {
            return rq.max(0.0).sqrt();
        }
        rq_prev = rq;
    }
    rq_prev.max(0.0).sqrt()
}

/// `(target/||a||_2) * a`. Rejects matrices with zero spectral norm.
pub fn rescale_to(a: &ArrayView2<f64>, target: f64) -> Result<Array2<f64>> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(EasError::invalid(format!(
            "rescale target must be positive and finite, got {target}"
        )));
    }
    let norm = spectral_norm(a);
    if norm <= 0.0 {
        return Err(EasError::invalid(
            "cannot rescale a matrix with zero spectral norm",
        ));
    }
    Ok(a.to_owned() * (target / norm))
}

/// Whether `||a||_2` lies within the bound: strictly below `c` when
/// `strict`, at or below `c` otherwise.
///
/// Cheap exact bounds decide most inputs: `||a||_2 <= ||a||_F` proves small
/// norms, and `||a||_2^2 >= max_j (a'a)_jj` proves large ones. The rest fall
/// through to the Jacobi eigensolver. Used per Monte Carlo draw, so the
/// shortcuts matter.
pub fn spectral_norm_within(a: &ArrayView2<f64>, c: f64, strict: bool) -> bool {
    let c2 = c * c;
    let mut frob2 = 0.0;
    for v in a.iter() {
        frob2 += v * v;
    }
    if !frob2.is_finite() {
        return false;
    }
    if frob2 < c2 || (!strict && frob2 == c2) {
        return true;
    }
    let s = gram(a);
    let n = s.nrows();
    let mut max_diag = 0.0_f64;
    for j in 0..n {
        max_diag = max_diag.max(s[[j, j]]);
    }
    if (strict && max_diag >= c2) || (!strict && max_diag > c2) {
        return false;
    }
    let lmax = *sym_eigenvalues(&s.view())
        .last()
        .expect("nonempty matrix has eigenvalues");
    if strict {
        lmax < c2
    } else {
        lmax <= c2
    }
}

pub fn frobenius_norm(a: &ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn gram(a: &ArrayView2<f64>) -> Array2<f64> {
    a.t().dot(a)
}

fn normalize(v: &mut [f64]) {
    let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn mat_vec(m: &Array2<f64>, v: &[f64], out: &mut [f64]) {
    let n = m.nrows();
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += m[[i, j]] * v[j];
        }
        out[i] = s;
    }
}
