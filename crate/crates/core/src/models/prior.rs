use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::math::log_sum_exp;

/// Univariate prior on a latent variable or a disturbance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PriorSpec {
    Normal {
        mean: f64,
        var: f64,
    },
    /// Two-component normal mixture with weight `weight` on the first component.
    MixtureOfNormals {
        weight: f64,
        mean1: f64,
        var1: f64,
        mean2: f64,
        var2: f64,
    },
    /// Location-scale Student-t with squared scale `scale2`.
    StudentT {
        loc: f64,
        scale2: f64,
        dof: f64,
    },
}

fn normal_logpdf(x: f64, m: f64, v: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m) * (x - m) / (2.0 * v)
}

impl PriorSpec {
    pub fn standard_normal() -> Self {
        PriorSpec::Normal {
            mean: 0.0,
            var: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PriorSpec::Normal { mean, var } => mean.is_finite() && var > 0.0 && var.is_finite(),
            PriorSpec::MixtureOfNormals {
                weight,
                mean1,
                var1,
                mean2,
                var2,
            } => {
                weight > 0.0
                    && weight < 1.0
                    && mean1.is_finite()
                    && mean2.is_finite()
                    && var1 > 0.0
                    && var2 > 0.0
                    && var1.is_finite()
                    && var2.is_finite()
            }
            PriorSpec::StudentT { loc, scale2, dof } => {
                loc.is_finite() && scale2 > 0.0 && scale2.is_finite() && dof > 0.0 && dof.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid prior {self:?}")))
        }
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        match *self {
            PriorSpec::Normal { mean, var } => normal_logpdf(x, mean, var),
            PriorSpec::MixtureOfNormals {
                weight,
                mean1,
                var1,
                mean2,
                var2,
            } => log_sum_exp(&[
                weight.ln() + normal_logpdf(x, mean1, var1),
                (-weight).ln_1p() + normal_logpdf(x, mean2, var2),
            ]),
            PriorSpec::StudentT { loc, scale2, dof } => {
                let z = (x - loc) * (x - loc) / (dof * scale2);
                ln_gamma(0.5 * (dof + 1.0))
                    - ln_gamma(0.5 * dof)
                    - 0.5 * (dof * std::f64::consts::PI * scale2).ln()
                    - 0.5 * (dof + 1.0) * z.ln_1p()
            }
        }
    }

    /// Derivative of the log-density.
    pub fn dlogpdf(&self, x: f64) -> f64 {
        match *self {
            PriorSpec::Normal { mean, var } => -(x - mean) / var,
            PriorSpec::MixtureOfNormals {
                weight,
                mean1,
                var1,
                mean2,
                var2,
            } => {
                let a = weight.ln() + normal_logpdf(x, mean1, var1);
                let b = (-weight).ln_1p() + normal_logpdf(x, mean2, var2);
                let z = log_sum_exp(&[a, b]);
                let r1 = (a - z).exp();
                let r2 = (b - z).exp();
                -r1 * (x - mean1) / var1 - r2 * (x - mean2) / var2
            }
            PriorSpec::StudentT { loc, scale2, dof } => {
                let d = x - loc;
                -(dof + 1.0) * d / (dof * scale2 + d * d)
            }
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PriorSpec::Normal { mean, var } => Normal::new(mean, var.sqrt())
                .expect("validated prior")
                .sample(rng),
            PriorSpec::MixtureOfNormals {
                weight,
                mean1,
                var1,
                mean2,
                var2,
            } => {
                let (m, v) = if rng.random::<f64>() < weight {
                    (mean1, var1)
                } else {
                    (mean2, var2)
                };
                Normal::new(m, v.sqrt()).expect("validated prior").sample(rng)
            }
            PriorSpec::StudentT { loc, scale2, dof } => {
                let t: f64 = StudentT::new(dof).expect("validated prior").sample(rng);
                loc + scale2.sqrt() * t
            }
        }
    }
}

/// Per-latent priors: a base prior with a different prior on a planted subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentPriors {
    pub base: PriorSpec,
    #[serde(default)]
    pub planted: Option<PriorSpec>,
    #[serde(default)]
    pub planted_indices: Vec<usize>,
}

impl LatentPriors {
    pub fn uniform(base: PriorSpec) -> Self {
        Self {
            base,
            planted: None,
            planted_indices: Vec::new(),
        }
    }

    pub fn planted(base: PriorSpec, planted: PriorSpec, indices: Vec<usize>) -> Self {
        Self {
            base,
            planted: Some(planted),
            planted_indices: indices,
        }
    }

    /// Expand to one prior per latent.
    pub fn expand(&self, n: usize) -> Result<Vec<PriorSpec>> {
        self.base.validate()?;
        let mut out = vec![self.base.clone(); n];
        if let Some(p) = &self.planted {
            p.validate()?;
            for &i in &self.planted_indices {
                if i >= n {
                    return Err(Error::InvalidConfig(format!(
                        "planted index {i} exceeds {n} latents"
                    )));
                }
                out[i] = p.clone();
            }
        } else if !self.planted_indices.is_empty() {
            return Err(Error::InvalidConfig(
                "planted indices given without a planted prior".into(),
            ));
        }
        Ok(out)
    }
}
