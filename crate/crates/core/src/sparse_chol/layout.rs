use super::pattern::{BlockKind, BlockPattern};

/// Which block a packed entry belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryGroup {
    /// Lower triangle of the diagonal block of latent `i`.
    Latent(usize),
    /// Sub-diagonal block linking latent `i` to latent `i + 1` (chain patterns).
    Transition(usize),
    /// Bottom block row entries coupling the global block to latent `i`.
    Coupling(usize),
    /// Lower triangle of the global diagonal block.
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub group: EntryGroup,
}

impl Entry {
    pub fn is_diagonal(&self) -> bool {
        self.row == self.col
    }
}

/// Index tables mapping packed positions to dense coordinates.
///
/// Packed order: for every latent block the column-wise lower triangle
/// (followed, for chains, by the column-major sub-diagonal block), then every
/// coupling block column-major, then the global lower triangle.
#[derive(Clone, Debug)]
pub struct Layout {
    pattern: BlockPattern,
    entries: Vec<Entry>,
    latent_start: Vec<usize>,
    transition_start: Vec<usize>,
    coupling_start: Vec<usize>,
    global_start: usize,
    col_ptr: Vec<usize>,
    col_entries: Vec<usize>,
    diag_entry: Vec<usize>,
}

impl Layout {
    pub fn new(pattern: &BlockPattern) -> Self {
        let n = pattern.n_latents();
        let g = pattern.global_dim();
        let goff = pattern.latent_total();
        let mut entries = Vec::with_capacity(pattern.packed_len());
        let mut latent_start = Vec::with_capacity(n);
        let mut transition_start = Vec::with_capacity(n);
        let mut coupling_start = Vec::with_capacity(n);

        for i in 0..n {
            let off = pattern.latent_offset(i);
            let m = pattern.latent_dim(i);
            latent_start.push(entries.len());
            push_tri(&mut entries, off, m, EntryGroup::Latent(i));
            transition_start.push(entries.len());
            if pattern.kind() == BlockKind::Markov && i + 1 < n {
                let next = pattern.latent_offset(i + 1);
                for c in 0..m {
                    for r in 0..pattern.latent_dim(i + 1) {
                        entries.push(Entry {
                            row: next + r,
                            col: off + c,
                            group: EntryGroup::Transition(i),
                        });
                    }
                }
            }
        }
        for i in 0..n {
            let off = pattern.latent_offset(i);
            coupling_start.push(entries.len());
            for c in 0..pattern.latent_dim(i) {
                for r in 0..g {
                    entries.push(Entry {
                        row: goff + r,
                        col: off + c,
                        group: EntryGroup::Coupling(i),
                    });
                }
            }
        }
        let global_start = entries.len();
        push_tri(&mut entries, goff, g, EntryGroup::Global);
        debug_assert_eq!(entries.len(), pattern.packed_len());

        let d = pattern.total_dim();
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by_key(|&k| (entries[k].col, entries[k].row));
        let mut col_ptr = vec![0; d + 1];
        for e in &entries {
            col_ptr[e.col + 1] += 1;
        }
        for j in 0..d {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut diag_entry = vec![0; d];
        for (k, e) in entries.iter().enumerate() {
            if e.is_diagonal() {
                diag_entry[e.row] = k;
            }
        }

        Self {
            pattern: pattern.clone(),
            entries,
            latent_start,
            transition_start,
            coupling_start,
            global_start,
            col_ptr,
            col_entries: order,
            diag_entry,
        }
    }

    pub fn pattern(&self) -> &BlockPattern {
        &self.pattern
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Packed index of the diagonal entry on dense row `j`.
    pub fn diag_entry(&self, j: usize) -> usize {
        self.diag_entry[j]
    }

    /// Packed indices of column `j`, ordered by row. The first is the diagonal.
    pub fn column(&self, j: usize) -> &[usize] {
        &self.col_entries[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn latent_start(&self, i: usize) -> usize {
        self.latent_start[i]
    }

    pub fn transition_start(&self, i: usize) -> usize {
        self.transition_start[i]
    }

    pub fn coupling_start(&self, i: usize) -> usize {
        self.coupling_start[i]
    }

    pub fn global_start(&self) -> usize {
        self.global_start
    }
}

fn push_tri(entries: &mut Vec<Entry>, off: usize, m: usize, group: EntryGroup) {
    for c in 0..m {
        for r in c..m {
            entries.push(Entry {
                row: off + r,
                col: off + c,
                group,
            });
        }
    }
}

/// Index of `(r, c)` inside a column-wise packed lower triangle of size `m`.
pub(crate) fn tri_index(m: usize, r: usize, c: usize) -> usize {
    debug_assert!(r >= c && r < m);
    c * m - c * (c + 1) / 2 + r
}
