use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::factor::SparseCholeskyFactor;
use super::pattern::{BlockKind, BlockPattern};
use crate::error::{check_len, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Small dense Gaussian parameterised by the lower Cholesky factor of its precision.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockGaussian {
    pub mean: DVector<f64>,
    /// Lower-triangular with positive diagonal; precision is `chol * chol^T`.
    pub chol: DMatrix<f64>,
}

impl BlockGaussian {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn logpdf(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut quad = 0.0;
        for c in 0..d {
            let mut s = 0.0;
            for r in c..d {
                s += self.chol[(r, c)] * (x[r] - self.mean[r]);
            }
            quad += s * s;
        }
        let logdet: f64 = (0..d).map(|j| self.chol[(j, j)].ln()).sum();
        -0.5 * d as f64 * LN_2PI + logdet - 0.5 * quad
    }

    /// `mean + chol^-T eps`.
    pub fn sample(&self, eps: &[f64]) -> Vec<f64> {
        let e = DVector::from_column_slice(eps);
        let z = self
            .chol
            .tr_solve_lower_triangular(&e)
            .expect("positive diagonal");
        (&self.mean + z).iter().copied().collect()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let inv = self
            .chol
            .solve_lower_triangular(&DMatrix::identity(self.dim(), self.dim()))
            .expect("positive diagonal");
        inv.transpose() * inv
    }
}

/// Dense Gaussian parameterised by a covariance Cholesky factor.
#[derive(Clone, Debug)]
pub struct CovGaussian {
    pub mean: DVector<f64>,
    pub cov_chol: DMatrix<f64>,
}

impl CovGaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let chol = nalgebra::Cholesky::new(cov)
            .ok_or_else(|| Error::NonFinite("covariance is not positive definite".into()))?;
        Ok(Self {
            mean,
            cov_chol: chol.l(),
        })
    }

    pub fn logpdf(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        let diff = DVector::from_column_slice(x) - &self.mean;
        let z = self
            .cov_chol
            .solve_lower_triangular(&diff)
            .expect("positive diagonal");
        let logdet: f64 = (0..d).map(|j| self.cov_chol[(j, j)].ln()).sum();
        -0.5 * d as f64 * LN_2PI - logdet - 0.5 * z.norm_squared()
    }
}

/// Marginal of latent `j` given the global block within one chain component:
/// `b_j | theta_G ~ N(mu_j + gain (theta_G - mu_G), cov)`.
#[derive(Clone, Debug)]
pub struct StateMarginal {
    pub gain: DMatrix<f64>,
    pub cov: DMatrix<f64>,
}

/// One Gaussian component `N(mean, (L L^T)^-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub factor: SparseCholeskyFactor,
}

impl GaussianComponent {
    pub fn new(mean: Vec<f64>, factor: SparseCholeskyFactor) -> Result<Self> {
        check_len("component mean", factor.dim(), mean.len())?;
        Ok(Self { mean, factor })
    }

    pub fn pattern(&self) -> &BlockPattern {
        self.factor.pattern()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn latent_mean(&self, i: usize) -> &[f64] {
        let r = self.pattern().latent_range(i);
        &self.mean[r]
    }

    pub fn global_mean(&self) -> &[f64] {
        &self.mean[self.pattern().global_range()]
    }

    pub fn logpdf(&self, theta: &[f64]) -> f64 {
        let diff: Vec<f64> = theta.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let z = self.factor.mul_transpose(&diff);
        let quad: f64 = z.iter().map(|v| v * v).sum();
        -0.5 * self.dim() as f64 * LN_2PI + self.factor.log_det() - 0.5 * quad
    }

    /// Gradient of the log-density with respect to `theta`.
    pub fn grad_logpdf(&self, theta: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = theta.iter().zip(&self.mean).map(|(a, b)| b - a).collect();
        self.factor.precision_mul(&diff)
    }

    /// `mean + L^-T eps`.
    pub fn sample(&self, eps: &[f64]) -> Vec<f64> {
        let z = self.factor.solve_upper(eps);
        z.iter().zip(&self.mean).map(|(a, b)| a + b).collect()
    }

    fn global_diff(&self, theta_g: &[f64]) -> Result<Vec<f64>> {
        check_len("global block", self.pattern().global_dim(), theta_g.len())?;
        Ok(theta_g
            .iter()
            .zip(self.global_mean())
            .map(|(a, b)| a - b)
            .collect())
    }

    /// Marginal of the global block.
    pub fn global_marginal(&self) -> Result<BlockGaussian> {
        if self.pattern().global_dim() == 0 {
            return Err(Error::NoGlobalBlock);
        }
        Ok(BlockGaussian {
            mean: DVector::from_column_slice(self.global_mean()),
            chol: self.factor.global_block(),
        })
    }

    /// Conditional of latent `i` given the global block (hierarchical patterns).
    pub fn latent_conditional(&self, i: usize, theta_g: &[f64]) -> Result<BlockGaussian> {
        if self.pattern().kind() != BlockKind::Hierarchical {
            return Err(Error::WrongPatternKind {
                expected: "hierarchical",
            });
        }
        self.pattern().check_latent(i)?;
        let shift = self.factor.coupling_transpose_mul(i, &self.global_diff(theta_g)?);
        Ok(shifted_conditional(
            self.latent_mean(i),
            self.factor.latent_block(i),
            &shift,
        ))
    }

    /// Conditional of latent `i` given its successor and the global block
    /// (chain patterns). `next` must be `None` exactly for the last latent.
    pub fn latent_conditional_markov(
        &self,
        i: usize,
        next: Option<&[f64]>,
        theta_g: &[f64],
    ) -> Result<BlockGaussian> {
        let shift = self.markov_shift(i, next, theta_g)?;
        Ok(shifted_conditional(
            self.latent_mean(i),
            self.factor.latent_block(i),
            &shift,
        ))
    }

    /// `Ltilde_i^T (b_{i+1} - mu_{i+1}) + L_Gi^T (theta_G - mu_G)` for chains,
    /// or only the coupling term for hierarchical patterns when `next` is `None`.
    pub(crate) fn markov_shift(
        &self,
        i: usize,
        next: Option<&[f64]>,
        theta_g: &[f64],
    ) -> Result<Vec<f64>> {
        let p = self.pattern();
        p.check_latent(i)?;
        let mut shift = self.factor.coupling_transpose_mul(i, &self.global_diff(theta_g)?);
        if p.kind() == BlockKind::Hierarchical {
            if next.is_some() {
                return Err(Error::WrongPatternKind { expected: "markov" });
            }
            return Ok(shift);
        }
        let last = i + 1 == p.n_latents();
        match (next, last) {
            (None, true) => {}
            (Some(b), false) => {
                check_len("successor latent", p.latent_dim(i + 1), b.len())?;
                let diff: Vec<f64> = b
                    .iter()
                    .zip(self.latent_mean(i + 1))
                    .map(|(a, m)| a - m)
                    .collect();
                for (s, t) in shift.iter_mut().zip(self.factor.transition_transpose_mul(i, &diff)) {
                    *s += t;
                }
            }
            _ => {
                return Err(Error::PatternMismatch(
                    "successor latent must be given for all but the last block".into(),
                ))
            }
        }
        Ok(shift)
    }

    /// Marginals of every latent given the global block for a chain component.
    pub fn state_marginals(&self) -> Result<Vec<StateMarginal>> {
        let p = self.pattern();
        if p.kind() != BlockKind::Markov {
            return Err(Error::WrongPatternKind { expected: "markov" });
        }
        let n = p.n_latents();
        let g = p.global_dim();
        let mut out: Vec<StateMarginal> = Vec::with_capacity(n);
        for j in (0..n).rev() {
            let lj = self.factor.latent_block(j);
            let a = lj
                .tr_solve_lower_triangular(&self.factor.coupling_block(j).transpose())
                .expect("positive diagonal");
            let linv = lj
                .solve_lower_triangular(&DMatrix::identity(lj.nrows(), lj.nrows()))
                .expect("positive diagonal");
            let c = linv.transpose() * &linv;
            let m = if let Some(succ) = out.last() {
                let b = lj
                    .tr_solve_lower_triangular(&self.factor.transition_block(j).transpose())
                    .expect("positive diagonal");
                StateMarginal {
                    gain: -(&b * &succ.gain) - a,
                    cov: &b * &succ.cov * b.transpose() + c,
                }
            } else {
                StateMarginal {
                    gain: -a,
                    cov: c,
                }
            };
            debug_assert_eq!(m.gain.ncols(), g);
            out.push(m);
        }
        out.reverse();
        Ok(out)
    }

    /// Log-density of `(b_j, theta_G)` under this chain component, using
    /// precomputed state marginals.
    pub fn state_global_logpdf(
        &self,
        marginals: &[StateMarginal],
        j: usize,
        b_j: &[f64],
        theta_g: &[f64],
    ) -> Result<f64> {
        let dg = DVector::from_vec(self.global_diff(theta_g)?);
        let m = &marginals[j];
        let mean = DVector::from_column_slice(self.latent_mean(j)) + &m.gain * dg;
        let cond = CovGaussian::new(mean, m.cov.clone())?;
        let global = if self.pattern().global_dim() > 0 {
            self.global_marginal()?.logpdf(theta_g)
        } else {
            0.0
        };
        Ok(global + cond.logpdf(b_j))
    }

    pub fn latent_range(&self, i: usize) -> Range<usize> {
        self.pattern().latent_range(i)
    }
}

/// `N(mean_i - chol^-T shift, (chol chol^T)^-1)`.
pub(crate) fn shifted_conditional(
    mean_i: &[f64],
    chol: DMatrix<f64>,
    shift: &[f64],
) -> BlockGaussian {
    let s = DVector::from_column_slice(shift);
    let z = chol.tr_solve_lower_triangular(&s).expect("positive diagonal");
    BlockGaussian {
        mean: DVector::from_column_slice(mean_i) - z,
        chol,
    }
}
