//! Graph selection for stable VAR(1) models.
//!
//! The model is `X^(t) = A X^(t-1) + Sigma^(1/2) U^(t)` with diagonal noise
//! `Sigma = diag{sigma_j^2}` and `X^(0) = 0`. A *graph* is the set of active
//! entries of the transition matrix `A`. This crate scores candidate graphs by
//! a generalized fiducial mass `r(G|Y)` restricted to epsilon-admissible
//! coefficient subsets, explores the graph space with a pseudo-marginal
//! (grouped independence) Metropolis-Hastings chain, and ships the elastic-net
//! baselines, condition checkers, and benchmark harness used to evaluate it.
//!
//! Module map:
//! - [`graph`]: graphs, per-equation predictor sets, the vec-index convention.
//! - [`data`]: observed series and its lagged pair `(Y, X)`.
//! - [`model`]: transition matrices, noise scales, simulation, population
//!   autocovariance.
//! - [`patterns`]: the five synthetic transition-matrix patterns.
//! - [`linalg`]: dense kernels (Cholesky, Jacobi eigenvalues, spectral norm).
//! - [`estim`]: per-graph least squares via per-equation Gram blocks.
//! - [`eas`]: the epsilon-admissibility h-function and its statistic.
//! - [`gfi`]: importance-sampled log graph masses.
//! - [`gimh`]: the pseudo-marginal chain over graphs.
//! - [`baselines`]: LASSO / elastic-net with forward-chaining CV.
//! - [`bench`]: condition checkers, metrics, experiment runner.
//! - [`report`]: serializable run outputs (JSON report, CSV tables, DOT).

// `!(x > 0.0)` style guards are deliberate: unlike `x <= 0.0` they also catch
// NaN. Plain index loops stay because the dense kernels index several matched
// buffers at once.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod bench;
pub mod data;
pub mod eas;
pub mod error;
pub mod estim;
pub mod gfi;
pub mod gimh;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod patterns;
pub mod report;
pub mod rng;

pub use data::TimeSeriesData;
pub use eas::EasParams;
pub use error::{EasError, Result};
pub use estim::GraphFit;
pub use gfi::MassEstimate;
pub use gimh::{ChainConfig, ChainResult};
pub use graph::Graph;
pub use model::{NoiseScale, TransitionMatrix};
pub use patterns::PatternKind;
