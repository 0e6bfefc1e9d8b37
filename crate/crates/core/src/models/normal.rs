use nalgebra::{DMatrix, DVector};

use super::data::Dataset;
use super::Target;
use crate::error::{check_finite, check_len, Error, Result};
use crate::sparse_chol::BlockPattern;

/// Gaussian hierarchy with a closed-form posterior.
///
/// With panel data, `y_it ~ N(b_i, noise_var)`, `b_i ~ N(m, latent_var)` and
/// `m ~ N(global_mean, global_var)`. With a series there are no latents and
/// `y_t ~ N(m, noise_var)`.
#[derive(Clone, Debug)]
pub struct NormalHierarchy {
    global_mean: f64,
    global_var: f64,
    latent_var: f64,
    noise_var: f64,
    groups: Vec<Vec<f64>>,
    direct: Vec<f64>,
    pattern: BlockPattern,
}

fn sq(v: f64) -> f64 {
    v * v
}

impl NormalHierarchy {
    pub fn new(
        global_mean: f64,
        global_var: f64,
        latent_var: f64,
        noise_var: f64,
        data: &Dataset,
    ) -> Result<Self> {
        for (name, v) in [
            ("global_var", global_var),
            ("latent_var", latent_var),
            ("noise_var", noise_var),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        let (groups, direct) = match data {
            Dataset::Panel(p) => {
                if p.p != 0 {
                    return Err(Error::InvalidConfig(
                        "the Gaussian hierarchy takes no covariates".into(),
                    ));
                }
                (p.subjects.iter().map(|s| s.y.clone()).collect(), Vec::new())
            }
            Dataset::Series { y } => (Vec::new(), y.clone()),
        };
        let pattern = BlockPattern::hierarchical(vec![1; groups.len()], 1)?;
        Ok(Self {
            global_mean,
            global_var,
            latent_var,
            noise_var,
            groups,
            direct,
            pattern,
        })
    }

    fn norm_const(var: f64) -> f64 {
        -0.5 * (2.0 * std::f64::consts::PI * var).ln()
    }

    /// Exact posterior mean and covariance of `(b_1, .., b_n, m)`.
    pub fn posterior(&self) -> (Vec<f64>, DMatrix<f64>) {
        let n = self.groups.len();
        let d = n + 1;
        let mut prec = DMatrix::zeros(d, d);
        let mut rhs = DVector::zeros(d);
        prec[(n, n)] = 1.0 / self.global_var + self.direct.len() as f64 / self.noise_var;
        rhs[n] = self.global_mean / self.global_var + self.direct.iter().sum::<f64>() / self.noise_var;
        for (i, y) in self.groups.iter().enumerate() {
            prec[(i, i)] = 1.0 / self.latent_var + y.len() as f64 / self.noise_var;
            prec[(i, n)] = -1.0 / self.latent_var;
            prec[(n, i)] = -1.0 / self.latent_var;
            prec[(n, n)] += 1.0 / self.latent_var;
            rhs[i] = y.iter().sum::<f64>() / self.noise_var;
        }
        let cov = prec
            .cholesky()
            .expect("posterior precision is positive definite")
            .inverse();
        let mean = &cov * rhs;
        (mean.iter().copied().collect(), cov)
    }
}

impl Target for NormalHierarchy {
    fn pattern(&self) -> &BlockPattern {
        &self.pattern
    }

    fn log_h(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.log_h_grad(theta)?.0)
    }

    fn log_h_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("parameter vector", self.pattern.total_dim(), theta.len())?;
        check_finite("parameter vector", theta)?;
        let n = self.groups.len();
        let m = theta[n];
        let mut grad = vec![0.0; theta.len()];
        let mut total =
            Self::norm_const(self.global_var) - sq(m - self.global_mean) / (2.0 * self.global_var);
        grad[n] = -(m - self.global_mean) / self.global_var;
        for &y in &self.direct {
            total += Self::norm_const(self.noise_var) - sq(y - m) / (2.0 * self.noise_var);
            grad[n] += (y - m) / self.noise_var;
        }
        for (i, ys) in self.groups.iter().enumerate() {
            let b = theta[i];
            total += Self::norm_const(self.latent_var) - sq(b - m) / (2.0 * self.latent_var);
            grad[i] -= (b - m) / self.latent_var;
            grad[n] += (b - m) / self.latent_var;
            for &y in ys {
                total += Self::norm_const(self.noise_var) - sq(y - b) / (2.0 * self.noise_var);
                grad[i] += (y - b) / self.noise_var;
            }
        }
        Ok((total, grad))
    }

    fn local_log_factor(&self, i: usize, b_i: &[f64], theta_g: &[f64]) -> Result<f64> {
        self.pattern.check_latent(i)?;
        check_len("latent block", 1, b_i.len())?;
        check_len("global block", 1, theta_g.len())?;
        let b = b_i[0];
        let mut total =
            Self::norm_const(self.latent_var) - sq(b - theta_g[0]) / (2.0 * self.latent_var);
        for &y in &self.groups[i] {
            total += Self::norm_const(self.noise_var) - sq(y - b) / (2.0 * self.noise_var);
        }
        Ok(total)
    }
}
