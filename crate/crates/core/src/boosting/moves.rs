use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::FreeMask;
use crate::sparse_chol::Layout;

/// Which parameters of a newly split component are optimised.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "move", content = "latents", rename_all = "snake_case")]
pub enum BoostMove {
    /// Every parameter of the new component.
    Global,
    /// Only the parameters entering the new component's global marginal.
    GlobalBlock,
    /// Only the parameters entering the conditionals of the listed latents.
    LatentSubset(Vec<usize>),
}

impl BoostMove {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Global => "global",
            Self::GlobalBlock => "global_block",
            Self::LatentSubset(_) => "latent_subset",
        }
    }

    pub fn validate(&self, n_latents: usize) -> Result<()> {
        if let Self::LatentSubset(s) = self {
            if s.is_empty() {
                return Err(Error::InvalidConfig("latent subset must be nonempty".into()));
            }
            if let Some(&i) = s.iter().find(|&&i| i >= n_latents) {
                return Err(Error::LatentIndex {
                    index: i,
                    len: n_latents,
                });
            }
        }
        Ok(())
    }

    pub fn mask(&self, layout: &Layout) -> FreeMask {
        match self {
            Self::Global => FreeMask::all(layout, true),
            Self::GlobalBlock => FreeMask::global_block(layout),
            Self::LatentSubset(s) => FreeMask::latent_subset(layout, s),
        }
    }

    pub fn frees_global(&self) -> bool {
        !matches!(self, Self::LatentSubset(_))
    }

    /// Latents whose parameters move, or `None` for all of them.
    pub fn freed_latents(&self) -> Option<&[usize]> {
        match self {
            Self::Global => None,
            Self::GlobalBlock => Some(&[]),
            Self::LatentSubset(s) => Some(s),
        }
    }
}
