//! VAR(1) model pieces: transition matrices, diagonal noise scales,
//! simulation, and the population autocovariance `Gamma_n(0)`.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::TimeSeriesData;
use crate::error::{EasError, Result};
use crate::graph::Graph;
use crate::linalg;
use crate::rng;

/// A `p x p` transition matrix, optionally bound to a graph whose inactive
/// entries must be exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    a: Array2<f64>,
}

impl TransitionMatrix {
    pub fn new(a: Array2<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(EasError::dim(format!(
                "transition matrix must be square and nonempty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if let Some(v) = a.iter().find(|v| !v.is_finite()) {
            return Err(EasError::invalid(format!(
                "transition matrix contains a non-finite entry: {v}"
            )));
        }
        Ok(TransitionMatrix { a })
    }

    /// Bind to a graph, verifying every inactive entry is exactly zero.
    pub fn sparse(a: Array2<f64>, graph: &Graph) -> Result<Self> {
        let tm = TransitionMatrix::new(a)?;
        if tm.p() != graph.p() {
            return Err(EasError::dim(format!(
                "matrix dimension {} does not match graph dimension {}",
                tm.p(),
                graph.p()
            )));
        }
        for j in 0..tm.p() {
            for k in 0..tm.p() {
                if tm.a[[j, k]] != 0.0 && !graph.contains(j, k) {
                    return Err(EasError::invalid(format!(
                        "entry ({j}, {k}) is nonzero but inactive in the graph"
                    )));
                }
            }
        }
        Ok(tm)
    }

    pub fn p(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn spectral_norm(&self) -> f64 {
        linalg::spectral_norm(&self.a.view())
    }

    /// Rescaled copy with spectral norm `target`.
    pub fn rescaled_to(&self, target: f64) -> Result<Self> {
        Ok(TransitionMatrix {
            a: linalg::rescale_to(&self.a.view(), target)?,
        })
    }
}

/// The diagonal noise scale `Sigma = diag{sigma_j^2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseScale {
    sigma2: Vec<f64>,
}

impl NoiseScale {
    pub fn new(sigma2: Vec<f64>) -> Result<Self> {
        if sigma2.is_empty() {
            return Err(EasError::invalid("noise scale must have p >= 1 entries"));
        }
        if let Some(v) = sigma2.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(EasError::invalid(format!(
                "noise variances must be strictly positive and finite, got {v}"
            )));
        }
        Ok(NoiseScale { sigma2 })
    }

    /// Unit variances, `Sigma = I_p`.
    pub fn identity(p: usize) -> Result<Self> {
        NoiseScale::new(vec![1.0; p])
    }

    pub fn p(&self) -> usize {
        self.sigma2.len()
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }
}

/// Simulate `n` steps of `X^(t) = A X^(t-1) + Sigma^(1/2) U^(t)` from
/// `X^(0) = 0`, returning the `p x (n+1)` series wrapped as data.
///
/// Deterministic given the seed. An unstable `A` (spectral norm at or above
/// one) is allowed but logged as a warning: the realized series can still be
/// finite at small `n`.
pub fn simulate_var(
    a: &TransitionMatrix,
    noise: &NoiseScale,
    n: usize,
    seed: u64,
) -> Result<TimeSeriesData> {
    simulate_var_with_noise(a, noise, n, seed).map(|(data, _)| data)
}

/// As [`simulate_var`], also returning the `p x n` standard-normal
/// innovations `U` so callers can verify `Y = A X + Sigma^(1/2) U` exactly.
pub fn simulate_var_with_noise(
    a: &TransitionMatrix,
    noise: &NoiseScale,
    n: usize,
    seed: u64,
) -> Result<(TimeSeriesData, Array2<f64>)> {
    let p = a.p();
    if noise.p() != p {
        return Err(EasError::dim(format!(
            "noise dimension {} does not match transition dimension {p}",
            noise.p()
        )));
    }
    if n == 0 {
        return Err(EasError::invalid("simulation needs n >= 1 steps"));
    }
    if a.spectral_norm() >= 1.0 {
        log::warn!(
            "simulating an unstable transition matrix (spectral norm {:.4} >= 1)",
            a.spectral_norm()
        );
    }
    let sigma: Vec<f64> = noise.sigma2().iter().map(|v| v.sqrt()).collect();
    let mut rng = rng::substream(seed, rng::domain::SIMULATE);
    let mut series = Array2::<f64>::zeros((p, n + 1));
    let mut u = Array2::<f64>::zeros((p, n));
    let am = a.matrix();
    for t in 1..=n {
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            u[[j, t - 1]] = z;
            let mut v = sigma[j] * z;
            for k in 0..p {
                v += am[[j, k]] * series[[k, t - 1]];
            }
            series[[j, t]] = v;
        }
    }
    Ok((TimeSeriesData::from_series(series)?, u))
}

/// Population autocovariance
/// `Gamma_n(0) = (1/n) sum_{t=1}^{n} sum_{k=0}^{t-2} A^k Sigma A'^k`,
/// the expectation of `X X' / n` under the model started at zero.
pub fn gamma_n0(a: &TransitionMatrix, noise: &NoiseScale, n: usize) -> Result<Array2<f64>> {
    let p = a.p();
    if noise.p() != p {
        return Err(EasError::dim(format!(
            "noise dimension {} does not match transition dimension {p}",
            noise.p()
        )));
    }
    if n == 0 {
        return Err(EasError::invalid("gamma_n0 needs n >= 1"));
    }
    // term = A^k Sigma A'^k, partial = sum_{i<=k} term_i; the outer sum over
    // t contributes partial_{t-2} for each t >= 2.
    let mut term = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        term[[j, j]] = noise.sigma2()[j];
    }
    let mut partial = term.clone();
    let mut acc = Array2::<f64>::zeros((p, p));
    for t in 2..=n {
        if t > 2 {
            term = a.matrix().dot(&term).dot(&a.matrix().t());
            partial += &term;
        }
        acc += &partial;
    }
    acc /= n as f64;
    // enforce exact symmetry against accumulated rounding
    let sym = (&acc + &acc.t()) * 0.5;
    Ok(sym)
}
