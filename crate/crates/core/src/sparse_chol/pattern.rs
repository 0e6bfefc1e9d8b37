use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparsity family of the precision Cholesky factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Latent blocks are conditionally independent given the global block.
    Hierarchical,
    /// Latent blocks form a first-order chain given the global block.
    Markov,
}

/// Block sizes of the parameter vector `(b_1, .., b_n, theta_G)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockPattern {
    kind: BlockKind,
    latent_dims: Vec<usize>,
    global_dim: usize,
}

impl BlockPattern {
    pub fn new(kind: BlockKind, latent_dims: Vec<usize>, global_dim: usize) -> Result<Self> {
        if latent_dims.iter().any(|&m| m == 0) {
            return Err(Error::PatternMismatch(
                "latent blocks must have positive dimension".into(),
            ));
        }
        if latent_dims.iter().sum::<usize>() + global_dim == 0 {
            return Err(Error::PatternMismatch("empty parameter vector".into()));
        }
        Ok(Self {
            kind,
            latent_dims,
            global_dim,
        })
    }

    pub fn hierarchical(latent_dims: Vec<usize>, global_dim: usize) -> Result<Self> {
        Self::new(BlockKind::Hierarchical, latent_dims, global_dim)
    }

    pub fn markov(latent_dims: Vec<usize>, global_dim: usize) -> Result<Self> {
        Self::new(BlockKind::Markov, latent_dims, global_dim)
    }

    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    pub fn latent_dims(&self) -> &[usize] {
        &self.latent_dims
    }

    pub fn n_latents(&self) -> usize {
        self.latent_dims.len()
    }

    pub fn latent_dim(&self, i: usize) -> usize {
        self.latent_dims[i]
    }

    pub fn global_dim(&self) -> usize {
        self.global_dim
    }

    pub fn latent_total(&self) -> usize {
        self.latent_dims.iter().sum()
    }

    pub fn total_dim(&self) -> usize {
        self.latent_total() + self.global_dim
    }

    pub fn latent_offset(&self, i: usize) -> usize {
        self.latent_dims[..i].iter().sum()
    }

    pub fn latent_range(&self, i: usize) -> Range<usize> {
        let start = self.latent_offset(i);
        start..start + self.latent_dims[i]
    }

    pub fn global_range(&self) -> Range<usize> {
        let start = self.latent_total();
        start..start + self.global_dim
    }

    /// Number of free scalars in the packed factor.
    pub fn packed_len(&self) -> usize {
        let tri = |m: usize| m * (m + 1) / 2;
        let g = self.global_dim;
        let mut len = tri(g);
        for (i, &m) in self.latent_dims.iter().enumerate() {
            len += tri(m) + g * m;
            if self.kind == BlockKind::Markov && i + 1 < self.latent_dims.len() {
                len += self.latent_dims[i + 1] * m;
            }
        }
        len
    }

    pub(crate) fn check_latent(&self, i: usize) -> Result<()> {
        if i < self.n_latents() {
            Ok(())
        } else {
            Err(Error::LatentIndex {
                index: i,
                len: self.n_latents(),
            })
        }
    }
}
