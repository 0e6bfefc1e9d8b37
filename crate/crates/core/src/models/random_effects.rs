use super::data::PanelData;
use super::prior::PriorSpec;
use super::Target;
use crate::error::{check_finite, check_len, Error, Result};
use crate::math::{softplus, softplus_logistic};
use crate::sparse_chol::BlockPattern;

/// Logistic regression with one scalar random intercept per subject:
/// `logit P(y_it = 1) = x_it^T beta + b_i`, `beta ~ N(0, beta_var I)`.
#[derive(Clone, Debug)]
pub struct RandomEffectsLogistic {
    priors: Vec<PriorSpec>,
    beta_var: f64,
    data: PanelData,
    pattern: BlockPattern,
}

impl RandomEffectsLogistic {
    pub fn new(priors: Vec<PriorSpec>, beta_var: f64, data: PanelData) -> Result<Self> {
        check_len("latent priors", data.subjects.len(), priors.len())?;
        if !(beta_var > 0.0) {
            return Err(Error::InvalidConfig("beta_var must be positive".into()));
        }
        for p in &priors {
            p.validate()?;
        }
        for s in &data.subjects {
            check_len("covariate rows", s.y.len() * data.p, s.x.len())?;
            check_binary(&s.y)?;
        }
        let pattern = BlockPattern::hierarchical(vec![1; priors.len()], data.p)?;
        Ok(Self {
            priors,
            beta_var,
            data,
            pattern,
        })
    }

    pub fn data(&self) -> &PanelData {
        &self.data
    }

    pub fn priors(&self) -> &[PriorSpec] {
        &self.priors
    }

    fn subject_loglik(&self, i: usize, b: f64, beta: &[f64]) -> f64 {
        let s = &self.data.subjects[i];
        let p = self.data.p;
        (0..s.len())
            .map(|t| {
                let eta = b + dot(s.row(t, p), beta);
                s.y[t] * eta - softplus(eta)
            })
            .sum()
    }

    fn beta_log_prior(&self, beta: &[f64]) -> f64 {
        let v = self.beta_var;
        beta.iter()
            .map(|b| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - b * b / (2.0 * v))
            .sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Target for RandomEffectsLogistic {
    fn pattern(&self) -> &BlockPattern {
        &self.pattern
    }

    fn log_h(&self, theta: &[f64]) -> Result<f64> {
        check_len("parameter vector", self.pattern.total_dim(), theta.len())?;
        check_finite("parameter vector", theta)?;
        let n = self.priors.len();
        let beta = &theta[n..];
        let mut total = self.beta_log_prior(beta);
        for i in 0..n {
            total += self.priors[i].logpdf(theta[i]) + self.subject_loglik(i, theta[i], beta);
        }
        Ok(total)
    }

    fn log_h_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("parameter vector", self.pattern.total_dim(), theta.len())?;
        check_finite("parameter vector", theta)?;
        let n = self.priors.len();
        let p = self.data.p;
        let beta = &theta[n..];
        let mut grad = vec![0.0; theta.len()];
        let mut total = self.beta_log_prior(beta);
        for (g, b) in grad[n..].iter_mut().zip(beta) {
            *g = -b / self.beta_var;
        }
        for i in 0..n {
            let b = theta[i];
            total += self.priors[i].logpdf(b);
            let mut gb = self.priors[i].dlogpdf(b);
            let s = &self.data.subjects[i];
            for t in 0..s.len() {
                let x = s.row(t, p);
                let eta = b + dot(x, beta);
                let (sp, lg) = softplus_logistic(eta);
                total += s.y[t] * eta - sp;
                let r = s.y[t] - lg;
                gb += r;
                for (g, xj) in grad[n..].iter_mut().zip(x) {
                    *g += r * xj;
                }
            }
            grad[i] = gb;
        }
        Ok((total, grad))
    }

    fn local_log_factor(&self, i: usize, b_i: &[f64], theta_g: &[f64]) -> Result<f64> {
        self.pattern.check_latent(i)?;
        check_len("latent block", 1, b_i.len())?;
        check_len("global block", self.data.p, theta_g.len())?;
        Ok(self.priors[i].logpdf(b_i[0]) + self.subject_loglik(i, b_i[0], theta_g))
    }
}

fn check_binary(y: &[f64]) -> Result<()> {
    if y.iter().all(|&v| v == 0.0 || v == 1.0) {
        Ok(())
    } else {
        Err(Error::InvalidConfig("binary responses must be 0 or 1".into()))
    }
}
