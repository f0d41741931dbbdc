//! Bayesian inference for Gaussian graphical models under G-Wishart priors.
//!
//! The crate covers
//!
//! * a Metropolis-Hastings sampler for the G-Wishart distribution on an
//!   arbitrary graph, built on a free-element Cholesky parameterization
//!   ([`chol`], [`gwishart`]),
//! * a reversible-jump sampler over `(K, G)` for multivariate normal data
//!   ([`ggm`]),
//! * the matrix-variate extension with row and column graphs ([`matrix`]),
//! * sparse CAR / MCAR models on lattices with Gaussian and Poisson
//!   likelihoods ([`spatial`]),
//! * CSV ingestion, the simulation fixture and convergence summaries ([`io`]).
//!
//! Vertex and region indices are 0-based throughout the API. Text formats
//! use 1-based labels.

// `!(x > 0.0)` rejects NaN as well as non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod chol;
pub mod diagnostics;
pub mod error;
pub mod ggm;
pub mod graph;
pub mod gwishart;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod rng;
pub mod spatial;

pub use error::{Error, Result};
