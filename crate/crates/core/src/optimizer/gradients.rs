use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mixture::{MixtureApproximation, MixturePoint};
use crate::models::Target;
use crate::rng::{standard_normals, substream, tag};

/// Target and mixture quantities at one draw.
#[derive(Clone, Debug)]
pub struct SampleEval {
    pub theta: Vec<f64>,
    pub log_h: f64,
    pub grad_log_h: Vec<f64>,
    pub point: MixturePoint,
    pub grad_log_q: Vec<f64>,
}

impl SampleEval {
    /// `log h - log q`.
    pub fn log_ratio(&self) -> f64 {
        self.log_h - self.point.log_q
    }

    /// `grad log h - grad log q`.
    pub fn grad_ratio(&self) -> Vec<f64> {
        self.grad_log_h
            .iter()
            .zip(&self.grad_log_q)
            .map(|(a, b)| a - b)
            .collect()
    }
}

pub fn evaluate<T: Target + ?Sized>(
    target: &T,
    mix: &MixtureApproximation,
    theta: Vec<f64>,
) -> Result<SampleEval> {
    let (log_h, grad_log_h) = target.log_h_grad(&theta)?;
    if !log_h.is_finite() {
        return Err(Error::NonFinite("log joint density".into()));
    }
    let point = mix.evaluate(&theta)?;
    let grad_log_q = mix.grad_logpdf(&theta, &point);
    Ok(SampleEval {
        theta,
        log_h,
        grad_log_h,
        point,
        grad_log_q,
    })
}

/// Draw `count` points from the mixture, keyed by `(seed, key)`, and evaluate
/// them in parallel.
pub fn draw_and_evaluate<T: Target + ?Sized>(
    target: &T,
    mix: &MixtureApproximation,
    count: usize,
    seed: u64,
    key: u64,
) -> Result<Vec<SampleEval>> {
    (0..count)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(seed, tag::MIXTURE_DRAW, key, s as u64);
            evaluate(target, mix, mix.sample(&mut rng))
        })
        .collect()
}

/// Standard-normal noise vectors keyed by `(seed, key)`.
pub fn factor_noise(dim: usize, count: usize, seed: u64, key: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|s| standard_normals(&mut substream(seed, tag::FACTOR_NOISE, key, s as u64), dim))
        .collect()
}

/// Per-draw reparameterisation gradients of the bound with respect to the
/// packed factor of the last component. Diagonal entries are on the log scale.
pub fn reparam_grad_l_samples<T: Target + ?Sized>(
    target: &T,
    mix: &MixtureApproximation,
    eps: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let comp = mix.last_component();
    let pi_last = *mix.weights().last().expect("non-empty");
    eps.par_iter()
        .map(|e| {
            let theta = comp.sample(e);
            let u: Vec<f64> = theta.iter().zip(&comp.mean).map(|(a, b)| a - b).collect();
            let ev = evaluate(target, mix, theta)?;
            let a = comp.factor.solve_lower(&ev.grad_ratio());
            Ok(comp
                .factor
                .layout()
                .entries()
                .iter()
                .map(|en| {
                    let g = -pi_last * u[en.row] * a[en.col];
                    if en.is_diagonal() {
                        g * comp.factor.diagonal()[en.col]
                    } else {
                        g
                    }
                })
                .collect())
        })
        .collect()
}

/// Monte Carlo average of [`reparam_grad_l_samples`].
pub fn reparam_grad_l<T: Target + ?Sized>(
    target: &T,
    mix: &MixtureApproximation,
    eps: &[Vec<f64>],
) -> Result<Vec<f64>> {
    Ok(column_mean(&reparam_grad_l_samples(target, mix, eps)?))
}

pub(crate) fn column_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; rows.first().map_or(0, Vec::len)];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    let n = rows.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Natural-gradient direction for the log-ratio of the last two components.
///
/// `baseline` is subtracted from every log-ratio; any constant leaves the
/// expectation unchanged because each responsibility integrates to one.
pub fn split_weight_gradient(evals: &[SampleEval], baseline: f64) -> f64 {
    let s: f64 = evals
        .iter()
        .map(|e| {
            let r = &e.point.responsibilities;
            let k = r.len();
            (r[k - 2] - r[k - 1]) * (e.log_ratio() - baseline)
        })
        .sum();
    s / evals.len() as f64
}

/// Natural-gradient directions for every log-ratio `log(pi_k / pi_K)`.
pub fn weight_gradient(evals: &[SampleEval], baseline: f64) -> Vec<f64> {
    let k = evals[0].point.responsibilities.len();
    let rows: Vec<Vec<f64>> = evals
        .iter()
        .map(|e| {
            let r = &e.point.responsibilities;
            (0..k - 1)
                .map(|j| (r[j] - r[k - 1]) * (e.log_ratio() - baseline))
                .collect()
        })
        .collect();
    column_mean(&rows)
}

/// Apply `log(pi_k / pi_K) += step * direction_k` to every non-reference weight.
pub fn natgrad_weight_update(
    mix: &mut MixtureApproximation,
    evals: &[SampleEval],
    baseline: f64,
    step: f64,
) {
    let g = weight_gradient(evals, baseline);
    let mut r = mix.log_ratios().to_vec();
    for (rk, gk) in r.iter_mut().zip(g) {
        *rk += step * gk;
    }
    mix.set_log_ratios(r).expect("same length");
}

/// Natural-gradient direction for the mean of the last component,
/// `E[delta_K Sigma_K (grad log h - grad log q)]`.
pub fn mean_gradient(mix: &MixtureApproximation, evals: &[SampleEval]) -> Vec<f64> {
    let comp = mix.last_component();
    let rows: Vec<Vec<f64>> = evals
        .iter()
        .map(|e| {
            let delta = *e.point.responsibilities.last().expect("non-empty");
            comp.factor
                .covariance_mul(&e.grad_ratio())
                .into_iter()
                .map(|v| delta * v)
                .collect()
        })
        .collect();
    column_mean(&rows)
}

/// Apply `mu_K += step * direction` on the free coordinates.
pub fn natgrad_mean_update(
    mix: &mut MixtureApproximation,
    evals: &[SampleEval],
    step: f64,
    free: &[bool],
) {
    let g = mean_gradient(mix, evals);
    let comp = mix.last_component_mut();
    for ((m, gj), &f) in comp.mean.iter_mut().zip(g).zip(free) {
        if f {
            *m += step * gj;
        }
    }
}

/// Score of the mixture log-density with respect to the packed factor of the
/// last component, at one evaluated draw.
pub fn score_grad_l(mix: &MixtureApproximation, ev: &SampleEval) -> Vec<f64> {
    let comp = mix.last_component();
    let pi_last = *mix.weights().last().expect("non-empty");
    let scale = pi_last * ev.point.responsibilities.last().expect("non-empty");
    let diff: Vec<f64> = ev.theta.iter().zip(&comp.mean).map(|(a, b)| a - b).collect();
    let z = comp.factor.mul_transpose(&diff);
    let diag = comp.factor.diagonal();
    comp.factor
        .layout()
        .entries()
        .iter()
        .map(|en| {
            let mut v = -diff[en.row] * z[en.col];
            if en.is_diagonal() {
                v += 1.0 / diag[en.col];
                v * diag[en.col] * scale
            } else {
                v * scale
            }
        })
        .collect()
}

/// Score-function estimator with per-coordinate control variates.
#[derive(Clone, Debug, Default)]
pub struct ControlVariate {
    coeffs: Option<Vec<f64>>,
}

impl ControlVariate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        self.coeffs.as_deref()
    }

    /// Per-draw terms `(log h - log q - c) * score` using the stored
    /// coefficients (zero before the first call), then refresh the
    /// coefficients from this batch.
    pub fn sample_terms(
        &mut self,
        mix: &MixtureApproximation,
        evals: &[SampleEval],
    ) -> Vec<Vec<f64>> {
        let scores: Vec<Vec<f64>> = evals.iter().map(|e| score_grad_l(mix, e)).collect();
        let f: Vec<f64> = evals.iter().map(SampleEval::log_ratio).collect();
        let dim = scores.first().map_or(0, Vec::len);
        let coeffs = self.coeffs.clone().unwrap_or_else(|| vec![0.0; dim]);
        let terms = scores
            .iter()
            .zip(&f)
            .map(|(s, fv)| s.iter().zip(&coeffs).map(|(sj, c)| (fv - c) * sj).collect())
            .collect();
        self.coeffs = Some(cv_coefficients(&scores, &f));
        terms
    }

    /// Averaged control-variate gradient estimate.
    pub fn grad_l(&mut self, mix: &MixtureApproximation, evals: &[SampleEval]) -> Vec<f64> {
        column_mean(&self.sample_terms(mix, evals))
    }
}

/// `Cov(f s_j, s_j) / Var(s_j)` per coordinate; zero where `s_j` is constant.
fn cv_coefficients(scores: &[Vec<f64>], f: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let dim = scores.first().map_or(0, Vec::len);
    if n < 2 {
        return vec![0.0; dim];
    }
    (0..dim)
        .map(|j| {
            let s: Vec<f64> = scores.iter().map(|r| r[j]).collect();
            let fs: Vec<f64> = s.iter().zip(f).map(|(a, b)| a * b).collect();
            let ms = s.iter().sum::<f64>() / n as f64;
            let mfs = fs.iter().sum::<f64>() / n as f64;
            let cov: f64 = fs.iter().zip(&s).map(|(a, b)| (a - mfs) * (b - ms)).sum();
            let var: f64 = s.iter().map(|b| (b - ms) * (b - ms)).sum();
            if var > 0.0 {
                cov / var
            } else {
                0.0
            }
        })
        .collect()
}
