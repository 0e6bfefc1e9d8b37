//! Boosting variational inference with mixtures of block-sparse Gaussians.
//!
//! The crate grows a Gaussian mixture approximation to a posterior one
//! component at a time. Each component has a sparse precision Cholesky factor
//! matched to the conditional independence structure of the model, either
//! hierarchical (latents independent given globals) or a first-order chain.
//! New components can be restricted to a subset of latents while leaving the
//! rest of the approximation untouched.

pub mod boosting;
pub mod cli;
pub mod error;
pub mod math;
pub mod mixture;
pub mod models;
pub mod optimizer;
pub mod rng;
pub mod sparse_chol;

pub use error::{Error, Result};
pub use mixture::{ConditionalMixture, MixtureApproximation};
pub use sparse_chol::{BlockKind, BlockPattern, GaussianComponent, SparseCholeskyFactor};
