//! Block-sparse Cholesky factors of Gaussian precision matrices.
//!
//! A parameter vector is ordered as `(b_1, .., b_n, theta_G)`. The factor `L`
//! of the precision `L L^T` is block lower-triangular with an arrow shape:
//! diagonal blocks for each latent and for the global block, plus a bottom
//! block row coupling the global block to every latent. Chain patterns add a
//! single sub-diagonal block between consecutive latents.
//!
//! Draws use `theta = mu + L^-T eps`, so the conditional of a latent given
//! everything after it in the ordering has a closed form read off one block row.

mod factor;
mod gaussian;
mod layout;
mod pattern;

pub use factor::SparseCholeskyFactor;
pub use gaussian::{BlockGaussian, CovGaussian, GaussianComponent, StateMarginal};
pub use layout::{Entry, EntryGroup, Layout};
pub use pattern::{BlockKind, BlockPattern};

pub(crate) use gaussian::shifted_conditional;
