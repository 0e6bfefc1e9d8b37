use std::f64::consts::LN_2;

use statrs::function::beta::ln_beta;

use super::prior::PriorSpec;
use super::Target;
use crate::error::{check_finite, check_len, Error, Result};
use crate::math::{log_logistic, logistic, softplus};
use crate::sparse_chol::BlockPattern;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// AR(1) latent states `b_1 = eta_1`, `b_i = phi b_{i-1} + eta_i` with
/// `phi = logistic(psi)` and independent disturbances `eta_i`.
#[derive(Clone, Debug)]
struct Chain {
    disturbances: Vec<PriorSpec>,
}

impl Chain {
    fn new(disturbances: Vec<PriorSpec>) -> Result<Self> {
        for p in &disturbances {
            p.validate()?;
        }
        Ok(Self { disturbances })
    }

    fn n(&self) -> usize {
        self.disturbances.len()
    }

    fn transition(&self, i: usize, prev: Option<f64>, b: f64, phi: f64) -> f64 {
        self.disturbances[i].logpdf(b - phi * prev.unwrap_or(0.0))
    }

    /// Sum of transition log-densities, adding gradients into `grad` and
    /// returning `(value, d/dphi)`.
    fn accumulate(&self, b: &[f64], phi: f64, grad: &mut [f64]) -> (f64, f64) {
        let mut total = 0.0;
        let mut dphi = 0.0;
        for i in 0..self.n() {
            let prev = if i == 0 { 0.0 } else { b[i - 1] };
            let eta = b[i] - phi * prev;
            total += self.disturbances[i].logpdf(eta);
            let s = self.disturbances[i].dlogpdf(eta);
            grad[i] += s;
            if i > 0 {
                grad[i - 1] -= phi * s;
                dphi -= s * prev;
            }
        }
        (total, dphi)
    }
}

/// Stochastic volatility: `y_i ~ N(0, exp(kappa + b_i))` with AR(1) log-volatility.
///
/// Globals are `(kappa, psi)`, `kappa ~ N(0, 1)` and `(phi + 1) / 2 ~ Beta(20, 1.5)`.
#[derive(Clone, Debug)]
pub struct StochasticVolatility {
    chain: Chain,
    y: Vec<f64>,
    pattern: BlockPattern,
}

/// Persistence prior shape parameters on `(phi + 1) / 2`.
pub const PERSISTENCE_BETA: (f64, f64) = (20.0, 1.5);

impl StochasticVolatility {
    pub fn new(disturbances: Vec<PriorSpec>, y: Vec<f64>) -> Result<Self> {
        check_len("disturbance priors", y.len(), disturbances.len())?;
        check_finite("observations", &y)?;
        let pattern = BlockPattern::markov(vec![1; y.len()], 2)?;
        Ok(Self {
            chain: Chain::new(disturbances)?,
            y,
            pattern,
        })
    }

    pub fn observations(&self) -> &[f64] {
        &self.y
    }

    fn emission(&self, i: usize, s: f64) -> f64 {
        -0.5 * LN_2PI - 0.5 * s - 0.5 * self.y[i] * self.y[i] * (-s).exp()
    }

    fn emission_grad(&self, i: usize, s: f64) -> f64 {
        -0.5 + 0.5 * self.y[i] * self.y[i] * (-s).exp()
    }

    /// Log prior density of `psi`, including the Jacobian of `phi = logistic(psi)`.
    pub fn log_prior_psi(psi: f64) -> f64 {
        let (a, b) = PERSISTENCE_BETA;
        let log_phi = log_logistic(psi);
        let log_one_minus_phi = log_logistic(-psi);
        let log_u = (0.5 * (1.0 + logistic(psi))).ln();
        let log_one_minus_u = log_one_minus_phi - LN_2;
        (a - 1.0) * log_u + (b - 1.0) * log_one_minus_u - ln_beta(a, b) - LN_2
            + log_phi
            + log_one_minus_phi
    }

    fn dlog_prior_psi(psi: f64) -> f64 {
        let (a, b) = PERSISTENCE_BETA;
        let phi = logistic(psi);
        let u = 0.5 * (1.0 + phi);
        let dphi = phi * (1.0 - phi);
        dphi * 0.5 * ((a - 1.0) / u - (b - 1.0) / (1.0 - u)) + (1.0 - phi) - phi
    }
}

impl Target for StochasticVolatility {
    fn pattern(&self) -> &BlockPattern {
        &self.pattern
    }

    fn log_h(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.log_h_grad(theta)?.0)
    }

    fn log_h_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("parameter vector", self.pattern.total_dim(), theta.len())?;
        check_finite("parameter vector", theta)?;
        let n = self.chain.n();
        let (kappa, psi) = (theta[n], theta[n + 1]);
        let phi = logistic(psi);
        let mut grad = vec![0.0; n + 2];
        let (mut total, dphi) = self.chain.accumulate(&theta[..n], phi, &mut grad);
        total += -0.5 * LN_2PI - 0.5 * kappa * kappa + Self::log_prior_psi(psi);
        grad[n] = -kappa;
        grad[n + 1] = dphi * phi * (1.0 - phi) + Self::dlog_prior_psi(psi);
        for i in 0..n {
            let s = kappa + theta[i];
            total += self.emission(i, s);
            let g = self.emission_grad(i, s);
            grad[i] += g;
            grad[n] += g;
        }
        Ok((total, grad))
    }

    fn chain_log_factors(
        &self,
        i: usize,
        prev: Option<&[f64]>,
        b_i: &[f64],
        theta_g: &[f64],
    ) -> Result<(f64, f64)> {
        check_chain_args(&self.pattern, i, prev, b_i, theta_g)?;
        let phi = logistic(theta_g[1]);
        let trans = self.chain.transition(i, prev.map(|p| p[0]), b_i[0], phi);
        Ok((trans, self.emission(i, theta_g[0] + b_i[0])))
    }
}

/// Binary time series `y_i ~ Bernoulli(logistic(b_i))` with AR(1) states.
///
/// The single global is `psi ~ N(0, 1)`, `phi = logistic(psi)`.
#[derive(Clone, Debug)]
pub struct TimeVaryingLogistic {
    chain: Chain,
    y: Vec<f64>,
    pattern: BlockPattern,
}

impl TimeVaryingLogistic {
    pub fn new(disturbances: Vec<PriorSpec>, y: Vec<f64>) -> Result<Self> {
        check_len("disturbance priors", y.len(), disturbances.len())?;
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidConfig("binary responses must be 0 or 1".into()));
        }
        let pattern = BlockPattern::markov(vec![1; y.len()], 1)?;
        Ok(Self {
            chain: Chain::new(disturbances)?,
            y,
            pattern,
        })
    }

    pub fn observations(&self) -> &[f64] {
        &self.y
    }

    fn emission(&self, i: usize, b: f64) -> f64 {
        self.y[i] * b - softplus(b)
    }
}

impl Target for TimeVaryingLogistic {
    fn pattern(&self) -> &BlockPattern {
        &self.pattern
    }

    fn log_h(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.log_h_grad(theta)?.0)
    }

    fn log_h_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("parameter vector", self.pattern.total_dim(), theta.len())?;
        check_finite("parameter vector", theta)?;
        let n = self.chain.n();
        let psi = theta[n];
        let phi = logistic(psi);
        let mut grad = vec![0.0; n + 1];
        let (mut total, dphi) = self.chain.accumulate(&theta[..n], phi, &mut grad);
        total += -0.5 * LN_2PI - 0.5 * psi * psi;
        grad[n] = dphi * phi * (1.0 - phi) - psi;
        for i in 0..n {
            total += self.emission(i, theta[i]);
            grad[i] += self.y[i] - logistic(theta[i]);
        }
        Ok((total, grad))
    }

    fn chain_log_factors(
        &self,
        i: usize,
        prev: Option<&[f64]>,
        b_i: &[f64],
        theta_g: &[f64],
    ) -> Result<(f64, f64)> {
        check_chain_args(&self.pattern, i, prev, b_i, theta_g)?;
        let phi = logistic(theta_g[0]);
        let trans = self.chain.transition(i, prev.map(|p| p[0]), b_i[0], phi);
        Ok((trans, self.emission(i, b_i[0])))
    }
}

fn check_chain_args(
    pattern: &BlockPattern,
    i: usize,
    prev: Option<&[f64]>,
    b_i: &[f64],
    theta_g: &[f64],
) -> Result<()> {
    pattern.check_latent(i)?;
    check_len("latent block", 1, b_i.len())?;
    check_len("global block", pattern.global_dim(), theta_g.len())?;
    match (i, prev) {
        (0, None) => Ok(()),
        (0, Some(_)) => Err(Error::PatternMismatch(
            "the first state has no predecessor".into(),
        )),
        (_, Some(p)) => check_len("predecessor latent", 1, p.len()),
        (_, None) => Err(Error::PatternMismatch(
            "a predecessor is required after the first state".into(),
        )),
    }
}
