use std::sync::Arc;

use nalgebra::DMatrix;

use super::layout::{tri_index, EntryGroup, Layout};
use super::pattern::{BlockKind, BlockPattern};
use crate::error::{check_finite, check_len, Error, Result};

/// Block-sparse lower-triangular Cholesky factor of a precision matrix.
///
/// Parameters are stored packed with diagonal entries on the log scale, so
/// any real vector of the right length is a valid factor.
#[derive(Clone, Debug)]
pub struct SparseCholeskyFactor {
    layout: Arc<Layout>,
    params: Vec<f64>,
    diag: Vec<f64>,
}

impl PartialEq for SparseCholeskyFactor {
    fn eq(&self, other: &Self) -> bool {
        self.layout.pattern() == other.layout.pattern() && self.params == other.params
    }
}

impl SparseCholeskyFactor {
    pub fn identity(layout: Arc<Layout>) -> Self {
        let params = vec![0.0; layout.len()];
        Self::from_parts(layout, params)
    }

    /// Rebuild a factor from its packed parameter vector.
    pub fn unpack(layout: Arc<Layout>, params: Vec<f64>) -> Result<Self> {
        check_len("packed factor", layout.len(), params.len())?;
        check_finite("packed factor", &params)?;
        Ok(Self::from_parts(layout, params))
    }

    fn from_parts(layout: Arc<Layout>, params: Vec<f64>) -> Self {
        let mut f = Self {
            diag: Vec::new(),
            layout,
            params,
        };
        f.refresh();
        f
    }

    /// Build from dense blocks holding log-scale diagonals.
    ///
    /// `transitions` must be empty for hierarchical patterns and hold `n - 1`
    /// blocks of shape `dim(i + 1) x dim(i)` for chains.
    pub fn from_blocks(
        layout: Arc<Layout>,
        latent: &[DMatrix<f64>],
        transitions: &[DMatrix<f64>],
        coupling: &[DMatrix<f64>],
        global: &DMatrix<f64>,
    ) -> Result<Self> {
        let p = layout.pattern().clone();
        let n = p.n_latents();
        let g = p.global_dim();
        check_len("latent blocks", n, latent.len())?;
        check_len("coupling blocks", n, coupling.len())?;
        let n_trans = if p.kind() == BlockKind::Markov {
            n.saturating_sub(1)
        } else {
            0
        };
        check_len("transition blocks", n_trans, transitions.len())?;
        let shape = |what: &'static str, m: &DMatrix<f64>, r: usize, c: usize| {
            if m.nrows() == r && m.ncols() == c {
                Ok(())
            } else {
                Err(Error::PatternMismatch(format!(
                    "{what} block is {}x{}, expected {r}x{c}",
                    m.nrows(),
                    m.ncols()
                )))
            }
        };
        let mut params = Vec::with_capacity(layout.len());
        for i in 0..n {
            let m = p.latent_dim(i);
            shape("latent", &latent[i], m, m)?;
            push_vech(&mut params, &latent[i]);
            if i < n_trans {
                shape("transition", &transitions[i], p.latent_dim(i + 1), m)?;
                params.extend(transitions[i].iter());
            }
        }
        for (i, c) in coupling.iter().enumerate() {
            shape("coupling", c, g, p.latent_dim(i))?;
            params.extend(c.iter());
        }
        shape("global", global, g, g)?;
        push_vech(&mut params, global);
        Self::unpack(layout, params)
    }

    fn refresh(&mut self) {
        let d = self.layout.pattern().total_dim();
        self.diag = (0..d)
            .map(|j| self.params[self.layout.diag_entry(j)].exp())
            .collect();
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn pattern(&self) -> &BlockPattern {
        self.layout.pattern()
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Packed parameters, diagonals on the log scale.
    pub fn pack(&self) -> Vec<f64> {
        self.params.clone()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutate packed parameters in place; cached diagonals are refreshed.
    pub fn update_params(&mut self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.params);
        self.refresh();
    }

    /// Actual (untransformed) value of packed entry `k`.
    pub fn entry_value(&self, k: usize) -> f64 {
        let e = self.layout.entries()[k];
        if e.is_diagonal() {
            self.diag[e.row]
        } else {
            self.params[k]
        }
    }

    /// Actual diagonal of the full factor.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `log det L`; the precision has log-determinant twice this value.
    pub fn log_det(&self) -> f64 {
        (0..self.dim())
            .map(|j| self.params[self.layout.diag_entry(j)])
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for (k, e) in self.layout.entries().iter().enumerate() {
            m[(e.row, e.col)] = self.entry_value(k);
        }
        m
    }

    /// `L v`.
    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (j, &vj) in v.iter().enumerate() {
            let col = self.layout.column(j);
            out[j] += self.diag[j] * vj;
            for &k in &col[1..] {
                out[self.layout.entries()[k].row] += self.params[k] * vj;
            }
        }
        out
    }

    /// `L^T v`.
    pub fn mul_transpose(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                let col = self.layout.column(j);
                let mut s = self.diag[j] * v[j];
                for &k in &col[1..] {
                    s += self.params[k] * v[self.layout.entries()[k].row];
                }
                s
            })
            .collect()
    }

    /// Solve `L x = r`.
    pub fn solve_lower(&self, r: &[f64]) -> Vec<f64> {
        let mut x = r.to_vec();
        for j in 0..self.dim() {
            x[j] /= self.diag[j];
            let xj = x[j];
            for &k in &self.layout.column(j)[1..] {
                x[self.layout.entries()[k].row] -= self.params[k] * xj;
            }
        }
        x
    }

    /// Solve `L^T x = r`.
    pub fn solve_upper(&self, r: &[f64]) -> Vec<f64> {
        let mut x = r.to_vec();
        for j in (0..self.dim()).rev() {
            let mut s = x[j];
            for &k in &self.layout.column(j)[1..] {
                s -= self.params[k] * x[self.layout.entries()[k].row];
            }
            x[j] = s / self.diag[j];
        }
        x
    }

    /// Precision times vector, `L L^T v`.
    pub fn precision_mul(&self, v: &[f64]) -> Vec<f64> {
        self.mul(&self.mul_transpose(v))
    }

    /// Covariance times vector, `L^-T L^-1 v`.
    pub fn covariance_mul(&self, v: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(v))
    }

    /// Diagonal block of latent `i` with actual diagonal values.
    pub fn latent_block(&self, i: usize) -> DMatrix<f64> {
        let m = self.pattern().latent_dim(i);
        self.tri_block(self.layout.latent_start(i), m)
    }

    /// Block at block-row `i + 1`, block-column `i` (chains only).
    pub fn transition_block(&self, i: usize) -> DMatrix<f64> {
        let p = self.pattern();
        let rows = p.latent_dim(i + 1);
        let cols = p.latent_dim(i);
        let start = self.layout.transition_start(i);
        DMatrix::from_column_slice(rows, cols, &self.params[start..start + rows * cols])
    }

    /// Bottom block row entry linking the global block to latent `i`.
    pub fn coupling_block(&self, i: usize) -> DMatrix<f64> {
        let p = self.pattern();
        let rows = p.global_dim();
        let cols = p.latent_dim(i);
        let start = self.layout.coupling_start(i);
        DMatrix::from_column_slice(rows, cols, &self.params[start..start + rows * cols])
    }

    pub fn global_block(&self) -> DMatrix<f64> {
        self.tri_block(self.layout.global_start(), self.pattern().global_dim())
    }

    fn tri_block(&self, start: usize, m: usize) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(m, m);
        for c in 0..m {
            for r in c..m {
                let v = self.params[start + tri_index(m, r, c)];
                b[(r, c)] = if r == c { v.exp() } else { v };
            }
        }
        b
    }

    /// Overwrite the log-diagonal of latent block `i`.
    pub fn set_latent_log_diagonal(&mut self, i: usize, values: &[f64]) {
        let m = self.pattern().latent_dim(i);
        let start = self.layout.latent_start(i);
        self.update_params(|p| {
            for (j, &v) in values.iter().enumerate().take(m) {
                p[start + tri_index(m, j, j)] = v;
            }
        });
    }

    pub fn latent_log_diagonal(&self, i: usize) -> Vec<f64> {
        let m = self.pattern().latent_dim(i);
        let start = self.layout.latent_start(i);
        (0..m).map(|j| self.params[start + tri_index(m, j, j)]).collect()
    }

    /// Overwrite the log-diagonal of the global block.
    pub fn set_global_log_diagonal(&mut self, values: &[f64]) {
        let m = self.pattern().global_dim();
        let start = self.layout.global_start();
        self.update_params(|p| {
            for (j, &v) in values.iter().enumerate().take(m) {
                p[start + tri_index(m, j, j)] = v;
            }
        });
    }

    /// `L_Gi^T v` for a global-length vector `v`.
    pub(crate) fn coupling_transpose_mul(&self, i: usize, v: &[f64]) -> Vec<f64> {
        let p = self.pattern();
        let g = p.global_dim();
        let start = self.layout.coupling_start(i);
        (0..p.latent_dim(i))
            .map(|c| {
                let col = &self.params[start + c * g..start + (c + 1) * g];
                col.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `Ltilde_i^T v` for a vector of length `dim(i + 1)`.
    pub(crate) fn transition_transpose_mul(&self, i: usize, v: &[f64]) -> Vec<f64> {
        let p = self.pattern();
        let rows = p.latent_dim(i + 1);
        let start = self.layout.transition_start(i);
        (0..p.latent_dim(i))
            .map(|c| {
                let col = &self.params[start + c * rows..start + (c + 1) * rows];
                col.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Packed indices belonging to a block group.
    pub fn group_indices(&self, group: EntryGroup) -> Vec<usize> {
        self.layout
            .entries()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.group == group)
            .map(|(k, _)| k)
            .collect()
    }
}

fn push_vech(out: &mut Vec<f64>, m: &DMatrix<f64>) {
    for c in 0..m.ncols() {
        for r in c..m.nrows() {
            out.push(m[(r, c)]);
        }
    }
}
