use crate::sparse_chol::{BlockPattern, EntryGroup, Layout};

/// Which parameters of the newest component (and the weights) may move.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreeMask {
    pub mean: Vec<bool>,
    pub factor: Vec<bool>,
    pub weight: bool,
}

impl FreeMask {
    pub fn all(layout: &Layout, weight: bool) -> Self {
        Self {
            mean: vec![true; layout.pattern().total_dim()],
            factor: vec![true; layout.len()],
            weight,
        }
    }

    pub fn none(layout: &Layout) -> Self {
        Self {
            mean: vec![false; layout.pattern().total_dim()],
            factor: vec![false; layout.len()],
            weight: false,
        }
    }

    /// Weights, global mean and global diagonal block.
    pub fn global_block(layout: &Layout) -> Self {
        let mut m = Self::none(layout);
        m.weight = true;
        for j in layout.pattern().global_range() {
            m.mean[j] = true;
        }
        for (k, e) in layout.entries().iter().enumerate() {
            m.factor[k] = e.group == EntryGroup::Global;
        }
        m
    }

    /// Weights plus the mean, diagonal block, outgoing transition block and
    /// coupling block of each latent in `subset`.
    pub fn latent_subset(layout: &Layout, subset: &[usize]) -> Self {
        let p: &BlockPattern = layout.pattern();
        let mut chosen = vec![false; p.n_latents()];
        for &i in subset {
            chosen[i] = true;
        }
        let mut m = Self::none(layout);
        m.weight = true;
        for (i, &c) in chosen.iter().enumerate() {
            if c {
                for j in p.latent_range(i) {
                    m.mean[j] = true;
                }
            }
        }
        for (k, e) in layout.entries().iter().enumerate() {
            m.factor[k] = match e.group {
                EntryGroup::Latent(i) | EntryGroup::Transition(i) | EntryGroup::Coupling(i) => {
                    chosen[i]
                }
                EntryGroup::Global => false,
            };
        }
        m
    }

    pub fn any_mean(&self) -> bool {
        self.mean.iter().any(|&b| b)
    }

    pub fn any_factor(&self) -> bool {
        self.factor.iter().any(|&b| b)
    }
}
