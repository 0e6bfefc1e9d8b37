//! Target posteriors known up to a normalising constant.
//!
//! Every model exposes the unnormalised log joint `log h(theta)`, its analytic
//! gradient, and the per-latent factors needed by the diagnostics: the local
//! factor `p(b_i | theta_G) p(y_i | b_i, theta_G)` for hierarchical models, or
//! the transition and emission terms for chains.

mod data;
mod normal;
mod prior;
mod random_effects;
mod state_space;

use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use data::{fmt_f64, Dataset, PanelData, Subject};
pub use normal::NormalHierarchy;
pub use prior::{LatentPriors, PriorSpec};
pub use random_effects::RandomEffectsLogistic;
pub use state_space::{StochasticVolatility, TimeVaryingLogistic, PERSISTENCE_BETA};

use crate::error::{Error, Result};
use crate::math::logistic;
use crate::rng::{substream, tag};
use crate::sparse_chol::BlockPattern;

/// Unnormalised log posterior over `(b_1, .., b_n, theta_G)`.
pub trait Target: Sync {
    fn pattern(&self) -> &BlockPattern;

    fn log_h(&self, theta: &[f64]) -> Result<f64>;

    /// `log h(theta)` together with its gradient.
    fn log_h_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// `log p(b_i | theta_G) + log p(y_i | b_i, theta_G)` (hierarchical models).
    fn local_log_factor(&self, _i: usize, _b_i: &[f64], _theta_g: &[f64]) -> Result<f64> {
        Err(Error::WrongPatternKind {
            expected: "hierarchical",
        })
    }

    /// `(log p(b_i | b_{i-1}, theta_G), log p(y_i | b_i, theta_G))` for chains;
    /// `prev` is `None` for the first state.
    fn chain_log_factors(
        &self,
        _i: usize,
        _prev: Option<&[f64]>,
        _b_i: &[f64],
        _theta_g: &[f64],
    ) -> Result<(f64, f64)> {
        Err(Error::WrongPatternKind { expected: "markov" })
    }
}

impl<T: Target + ?Sized> Target for &T {
    fn pattern(&self) -> &BlockPattern {
        (**self).pattern()
    }
    fn log_h(&self, theta: &[f64]) -> Result<f64> {
        (**self).log_h(theta)
    }
    fn log_h_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        (**self).log_h_grad(theta)
    }
    fn local_log_factor(&self, i: usize, b_i: &[f64], theta_g: &[f64]) -> Result<f64> {
        (**self).local_log_factor(i, b_i, theta_g)
    }
    fn chain_log_factors(
        &self,
        i: usize,
        prev: Option<&[f64]>,
        b_i: &[f64],
        theta_g: &[f64],
    ) -> Result<(f64, f64)> {
        (**self).chain_log_factors(i, prev, b_i, theta_g)
    }
}

fn one() -> f64 {
    1.0
}

fn default_sv_phi() -> f64 {
    0.95
}

fn default_tv_phi() -> f64 {
    0.9
}

/// Model family, priors and simulation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    RandomEffectsLogistic {
        n: usize,
        t: usize,
        p: usize,
        priors: LatentPriors,
        #[serde(default = "one")]
        beta_var: f64,
        /// Coefficients used when simulating; drawn from `N(0, 0.25)` if absent.
        #[serde(default)]
        true_beta: Option<Vec<f64>>,
        /// Random effects used when simulating; drawn from the priors if absent.
        #[serde(default)]
        true_latents: Option<Vec<f64>>,
    },
    StochasticVolatility {
        n: usize,
        priors: LatentPriors,
        /// Log-variance level used when simulating.
        #[serde(default)]
        kappa: f64,
        /// Persistence used when simulating.
        #[serde(default = "default_sv_phi")]
        phi: f64,
    },
    TimeVaryingLogistic {
        n: usize,
        priors: LatentPriors,
        #[serde(default = "default_tv_phi")]
        phi: f64,
    },
    /// Gaussian hierarchy with a closed-form posterior. `n = 0` observes the
    /// global mean directly `t` times.
    NormalHierarchy {
        n: usize,
        t: usize,
        #[serde(default)]
        global_mean: f64,
        #[serde(default = "one")]
        global_var: f64,
        #[serde(default = "one")]
        latent_var: f64,
        #[serde(default = "one")]
        noise_var: f64,
        /// Global mean used when simulating; drawn from its prior if absent.
        #[serde(default)]
        true_global: Option<f64>,
    },
}

/// A model bound to its data.
#[derive(Clone, Debug)]
pub enum Model {
    RandomEffects(RandomEffectsLogistic),
    Volatility(StochasticVolatility),
    BinaryChain(TimeVaryingLogistic),
    Normal(NormalHierarchy),
}

impl Target for Model {
    fn pattern(&self) -> &BlockPattern {
        match self {
            Model::RandomEffects(m) => m.pattern(),
            Model::Volatility(m) => m.pattern(),
            Model::BinaryChain(m) => m.pattern(),
            Model::Normal(m) => m.pattern(),
        }
    }
    fn log_h(&self, theta: &[f64]) -> Result<f64> {
        match self {
            Model::RandomEffects(m) => m.log_h(theta),
            Model::Volatility(m) => m.log_h(theta),
            Model::BinaryChain(m) => m.log_h(theta),
            Model::Normal(m) => m.log_h(theta),
        }
    }
    fn log_h_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self {
            Model::RandomEffects(m) => m.log_h_grad(theta),
            Model::Volatility(m) => m.log_h_grad(theta),
            Model::BinaryChain(m) => m.log_h_grad(theta),
            Model::Normal(m) => m.log_h_grad(theta),
        }
    }
    fn local_log_factor(&self, i: usize, b_i: &[f64], theta_g: &[f64]) -> Result<f64> {
        match self {
            Model::RandomEffects(m) => m.local_log_factor(i, b_i, theta_g),
            Model::Volatility(m) => m.local_log_factor(i, b_i, theta_g),
            Model::BinaryChain(m) => m.local_log_factor(i, b_i, theta_g),
            Model::Normal(m) => m.local_log_factor(i, b_i, theta_g),
        }
    }
    fn chain_log_factors(
        &self,
        i: usize,
        prev: Option<&[f64]>,
        b_i: &[f64],
        theta_g: &[f64],
    ) -> Result<(f64, f64)> {
        match self {
            Model::RandomEffects(m) => m.chain_log_factors(i, prev, b_i, theta_g),
            Model::Volatility(m) => m.chain_log_factors(i, prev, b_i, theta_g),
            Model::BinaryChain(m) => m.chain_log_factors(i, prev, b_i, theta_g),
            Model::Normal(m) => m.chain_log_factors(i, prev, b_i, theta_g),
        }
    }
}

/// Output of [`ModelSpec::simulate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub dataset: Dataset,
    /// Parameter vector that generated the data, on the model's scale.
    pub theta: Vec<f64>,
    pub planted: Vec<usize>,
}

impl ModelSpec {
    /// Latent priors; the Gaussian hierarchy has none of its own.
    pub fn priors(&self) -> Option<&LatentPriors> {
        match self {
            ModelSpec::RandomEffectsLogistic { priors, .. }
            | ModelSpec::StochasticVolatility { priors, .. }
            | ModelSpec::TimeVaryingLogistic { priors, .. } => Some(priors),
            ModelSpec::NormalHierarchy { .. } => None,
        }
    }

    fn latent_priors(&self, n: usize) -> Result<Vec<PriorSpec>> {
        self.priors().map_or(Ok(Vec::new()), |p| p.expand(n))
    }

    pub fn n(&self) -> usize {
        match self {
            ModelSpec::RandomEffectsLogistic { n, .. }
            | ModelSpec::StochasticVolatility { n, .. }
            | ModelSpec::TimeVaryingLogistic { n, .. }
            | ModelSpec::NormalHierarchy { n, .. } => *n,
        }
    }

    /// Bind the model to a dataset; the number of latents follows the data.
    pub fn build(&self, data: &Dataset) -> Result<Model> {
        if let ModelSpec::NormalHierarchy {
            global_mean,
            global_var,
            latent_var,
            noise_var,
            ..
        } = self
        {
            return Ok(Model::Normal(NormalHierarchy::new(
                *global_mean,
                *global_var,
                *latent_var,
                *noise_var,
                data,
            )?));
        }
        let n = data.n_latents();
        let priors = self.latent_priors(n)?;
        match (self, data) {
            (ModelSpec::RandomEffectsLogistic { beta_var, .. }, Dataset::Panel(panel)) => Ok(
                Model::RandomEffects(RandomEffectsLogistic::new(priors, *beta_var, panel.clone())?),
            ),
            (ModelSpec::StochasticVolatility { .. }, Dataset::Series { y }) => Ok(
                Model::Volatility(StochasticVolatility::new(priors, y.clone())?),
            ),
            (ModelSpec::TimeVaryingLogistic { .. }, Dataset::Series { y }) => Ok(
                Model::BinaryChain(TimeVaryingLogistic::new(priors, y.clone())?),
            ),
            _ => Err(Error::InvalidConfig(
                "data layout does not match the model family".into(),
            )),
        }
    }

    /// Draw a synthetic dataset; `n = 0` yields an empty dataset.
    pub fn simulate(&self, seed: u64) -> Result<Simulation> {
        let mut rng = substream(seed, tag::SIMULATE, 0, 0);
        let n = self.n();
        let priors = self.latent_priors(n)?;
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        let planted = self
            .priors()
            .map_or_else(Vec::new, |p| p.planted_indices.clone());
        match self {
            ModelSpec::RandomEffectsLogistic {
                t,
                p,
                true_beta,
                true_latents,
                ..
            } => {
                if *p == 0 {
                    return Err(Error::InvalidConfig(
                        "the first covariate is the intercept, so p >= 1".into(),
                    ));
                }
                let beta = match true_beta {
                    Some(b) if b.len() == *p => b.clone(),
                    Some(b) => {
                        return Err(Error::DimensionMismatch {
                            context: "true_beta",
                            expected: *p,
                            found: b.len(),
                        })
                    }
                    None => (0..*p).map(|_| 0.5 * std_normal.sample(&mut rng)).collect(),
                };
                let latents = match true_latents {
                    Some(b) if b.len() == n => b.clone(),
                    Some(b) => {
                        return Err(Error::DimensionMismatch {
                            context: "true_latents",
                            expected: n,
                            found: b.len(),
                        })
                    }
                    None => priors.iter().map(|pr| pr.sample(&mut rng)).collect(),
                };
                let mut subjects = Vec::with_capacity(n);
                for &b in &latents {
                    let mut s = Subject::default();
                    for _ in 0..*t {
                        let mut row = vec![1.0];
                        row.extend((1..*p).map(|_| std_normal.sample(&mut rng)));
                        let eta = b + row.iter().zip(&beta).map(|(x, c)| x * c).sum::<f64>();
                        let y = Bernoulli::new(logistic(eta))
                            .expect("probability")
                            .sample(&mut rng);
                        s.y.push(if y { 1.0 } else { 0.0 });
                        s.x.extend(row);
                    }
                    subjects.push(s);
                }
                let mut theta = latents;
                theta.extend(beta);
                Ok(Simulation {
                    dataset: Dataset::Panel(PanelData { p: *p, subjects }),
                    theta,
                    planted,
                })
            }
            ModelSpec::StochasticVolatility { kappa, phi, .. } => {
                check_phi(*phi)?;
                let b = ar1_path(&priors, *phi, &mut rng);
                let y = b
                    .iter()
                    .map(|bi| (0.5 * (kappa + bi)).exp() * std_normal.sample(&mut rng))
                    .collect();
                let mut theta = b;
                theta.extend([*kappa, logit(*phi)]);
                Ok(Simulation {
                    dataset: Dataset::Series { y },
                    theta,
                    planted,
                })
            }
            ModelSpec::NormalHierarchy {
                t,
                global_mean,
                global_var,
                latent_var,
                noise_var,
                true_global,
                ..
            } => {
                let m = true_global
                    .unwrap_or_else(|| global_mean + global_var.sqrt() * std_normal.sample(&mut rng));
                let mut draw = |mean: f64, var: f64| mean + var.sqrt() * std_normal.sample(&mut rng);
                if n == 0 {
                    let y = (0..*t).map(|_| draw(m, *noise_var)).collect();
                    return Ok(Simulation {
                        dataset: Dataset::Series { y },
                        theta: vec![m],
                        planted,
                    });
                }
                let latents: Vec<f64> = (0..n).map(|_| draw(m, *latent_var)).collect();
                let subjects = latents
                    .iter()
                    .map(|&b| Subject {
                        y: (0..*t).map(|_| draw(b, *noise_var)).collect(),
                        x: Vec::new(),
                    })
                    .collect();
                let mut theta = latents;
                theta.push(m);
                Ok(Simulation {
                    dataset: Dataset::Panel(PanelData { p: 0, subjects }),
                    theta,
                    planted,
                })
            }
            ModelSpec::TimeVaryingLogistic { phi, .. } => {
                check_phi(*phi)?;
                let b = ar1_path(&priors, *phi, &mut rng);
                let y = b
                    .iter()
                    .map(|&bi| {
                        let hit = Bernoulli::new(logistic(bi))
                            .expect("probability")
                            .sample(&mut rng);
                        if hit {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let mut theta = b;
                theta.push(logit(*phi));
                Ok(Simulation {
                    dataset: Dataset::Series { y },
                    theta,
                    planted,
                })
            }
        }
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if phi > 0.0 && phi < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("persistence {phi} must lie in (0, 1)")))
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn ar1_path<R: rand::Rng + ?Sized>(priors: &[PriorSpec], phi: f64, rng: &mut R) -> Vec<f64> {
    let mut b: Vec<f64> = Vec::with_capacity(priors.len());
    for pr in priors {
        let prev = b.last().copied().unwrap_or(0.0);
        b.push(phi * prev + pr.sample(rng));
    }
    b
}
