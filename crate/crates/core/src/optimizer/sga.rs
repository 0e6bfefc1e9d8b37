use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::gradients::{
    draw_and_evaluate, factor_noise, mean_gradient, reparam_grad_l, split_weight_gradient,
    weight_gradient, SampleEval,
};
use super::mask::FreeMask;
use crate::error::{Error, Result};
use crate::math::{mean, sample_variance};
use crate::mixture::MixtureApproximation;
use crate::models::Target;
use crate::rng::tag;

/// Settings for stochastic gradient ascent on the newest component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgaConfig {
    pub iterations: usize,
    pub samples: usize,
    pub alpha_mean: f64,
    pub alpha_factor: f64,
    pub alpha_weight: f64,
    /// Elementwise bound on averaged gradients before the ADAM update.
    pub clip: f64,
    pub trace_every: usize,
    /// Update every mixture weight instead of only the newest split pair.
    pub all_weights: bool,
    /// Stop once the smoothed bound has gained less than `tolerance` over
    /// `patience` trace points.
    pub early_stop: Option<EarlyStop>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub patience: usize,
    pub tolerance: f64,
}

impl Default for SgaConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            samples: 100,
            alpha_mean: 0.01,
            alpha_factor: 0.001,
            alpha_weight: 0.001,
            clip: 100.0,
            trace_every: 50,
            all_weights: false,
            early_stop: None,
        }
    }
}

/// Monte Carlo estimate of the evidence lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElboEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl ElboEstimate {
    pub fn from_log_ratios(r: &[f64]) -> Self {
        Self {
            value: mean(r),
            std_error: (sample_variance(r) / r.len() as f64).sqrt(),
        }
    }
}

/// Smoothed bound over a window of iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub elbo: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgaReport {
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
}

/// Estimate the bound with `samples` mixture draws keyed by `(seed, key)`.
pub fn estimate_elbo<T: Target + ?Sized>(
    target: &T,
    mix: &MixtureApproximation,
    samples: usize,
    seed: u64,
    key: u64,
) -> Result<ElboEstimate> {
    let evals = draw_and_evaluate(target, mix, samples, seed, key ^ (tag::ELBO << 56))?;
    let r: Vec<f64> = evals.iter().map(SampleEval::log_ratio).collect();
    Ok(ElboEstimate::from_log_ratios(&r))
}

fn clip(g: &mut [f64], bound: f64) {
    for v in g {
        *v = v.clamp(-bound, bound);
    }
}

fn diverged(iteration: usize, parameter: &str) -> Error {
    Error::Divergence {
        iteration,
        parameter: parameter.to_string(),
    }
}

/// Optimise the free parameters of the last component (and the weights).
///
/// Each iteration first moves the factor along a reparameterisation gradient,
/// then draws from the mixture to move the weights and the mean along natural
/// gradients. Weight gradients are centred on the previous batch's mean
/// log-ratio. Draws use substreams keyed by `(seed, stream, iteration, draw)`.
pub fn run_sga<T: Target + ?Sized>(
    target: &T,
    mix: &mut MixtureApproximation,
    mask: &FreeMask,
    cfg: &SgaConfig,
    seed: u64,
    stream: u64,
) -> Result<SgaReport> {
    if cfg.samples == 0 {
        return Err(Error::InvalidConfig("samples must be positive".into()));
    }
    let d = mix.dim();
    let n_factor = mix.layout().len();
    let weight_free = mask.weight && mix.n_components() > 1;
    let n_weight = if cfg.all_weights {
        mix.n_components().saturating_sub(1)
    } else {
        1
    };
    let mut adam_factor = Adam::new(n_factor, cfg.alpha_factor);
    let mut adam_mean = Adam::new(d, cfg.alpha_mean);
    let mut adam_weight = Adam::new(n_weight, cfg.alpha_weight);
    let trace_every = cfg.trace_every.max(1);
    let mut trace = Vec::new();
    let mut window = Vec::with_capacity(trace_every);
    let mut done = 0;
    let mut baseline = None;

    for it in 0..cfg.iterations {
        let key = (stream << 32) | it as u64;
        if mask.any_factor() {
            let eps = factor_noise(d, cfg.samples, seed, key);
            let mut g = reparam_grad_l(target, mix, &eps)?;
            clip(&mut g, cfg.clip);
            let step = adam_factor.step(&g);
            mix.last_component_mut().factor.update_params(|p| {
                for ((pj, sj), &f) in p.iter_mut().zip(step).zip(&mask.factor) {
                    if f {
                        *pj += sj;
                    }
                }
            });
            if mix.last_component().factor.params().iter().any(|v| !v.is_finite())
                || mix.last_component().factor.diagonal().iter().any(|v| !(*v > 0.0) || !v.is_finite())
            {
                return Err(diverged(it, "factor"));
            }
        }

        let evals = draw_and_evaluate(target, mix, cfg.samples, seed, key)?;
        let ratios: Vec<f64> = evals.iter().map(SampleEval::log_ratio).collect();
        let est = ElboEstimate::from_log_ratios(&ratios);
        if !est.value.is_finite() {
            return Err(diverged(it, "elbo"));
        }
        window.push(est.value);
        let b = baseline.unwrap_or(est.value);
        baseline = Some(est.value);

        if weight_free {
            if cfg.all_weights {
                let mut g = weight_gradient(&evals, b);
                clip(&mut g, cfg.clip);
                let step = adam_weight.step(&g);
                let mut r = mix.log_ratios().to_vec();
                for (rk, sk) in r.iter_mut().zip(step) {
                    *rk += sk;
                }
                mix.set_log_ratios(r)?;
            } else {
                let mut g = [split_weight_gradient(&evals, b)];
                clip(&mut g, cfg.clip);
                let step = adam_weight.step(&g)[0];
                let x = mix.split_logit() + step;
                mix.set_split_logit(x);
            }
            if mix.log_ratios().iter().any(|v| !v.is_finite()) {
                return Err(diverged(it, "weights"));
            }
        }

        if mask.any_mean() {
            let mut g = mean_gradient(mix, &evals);
            clip(&mut g, cfg.clip);
            let step = adam_mean.step(&g);
            let comp = mix.last_component_mut();
            for ((m, sj), &f) in comp.mean.iter_mut().zip(step).zip(&mask.mean) {
                if f {
                    *m += sj;
                }
            }
            if comp.mean.iter().any(|v| !v.is_finite()) {
                return Err(diverged(it, "mean"));
            }
        }

        done = it + 1;
        if window.len() == trace_every {
            trace.push(TracePoint {
                iteration: done,
                elbo: mean(&window),
                std_error: (sample_variance(&window) / window.len() as f64).sqrt(),
            });
            window.clear();
            if let Some(es) = &cfg.early_stop {
                if plateaued(&trace, es) {
                    break;
                }
            }
        }
    }
    Ok(SgaReport {
        iterations: done,
        trace,
    })
}

fn plateaued(trace: &[TracePoint], es: &EarlyStop) -> bool {
    if es.patience == 0 || trace.len() <= es.patience {
        return false;
    }
    let recent = &trace[trace.len() - es.patience..];
    let before = trace[trace.len() - es.patience - 1].elbo;
    recent.iter().map(|t| t.elbo).fold(f64::NEG_INFINITY, f64::max) - before < es.tolerance
}
