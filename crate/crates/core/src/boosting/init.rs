use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{block_points, chain_target_terms, logpdf_with_last, predecessor_draws, GridConfig};
use super::moves::BoostMove;
use crate::error::Result;
use crate::math::{linspace, sample_variance};
use crate::mixture::{ConditionalMixture, MixtureApproximation};
use crate::models::Target;
use crate::rng::{standard_normals, substream, tag};
use crate::sparse_chol::{shifted_conditional, BlockGaussian, BlockKind, GaussianComponent};

/// Grid searches that place a freshly split component before optimisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    pub enabled: bool,
    /// Candidate latent means, spread evenly over the scoring grid range.
    pub mean_candidates: usize,
    /// Candidate shifts of each latent log-diagonal, spread over
    /// `[-diag_shift, diag_shift]`.
    pub diag_candidates: usize,
    pub diag_shift: f64,
    /// Candidate global means per coordinate, spread over the source mean
    /// plus or minus `global_width` marginal standard deviations.
    pub global_candidates: usize,
    pub global_width: f64,
    /// Untransformed diagonal given to the new global block.
    pub global_diagonal: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            mean_candidates: 21,
            diag_candidates: 5,
            diag_shift: 1.0,
            global_candidates: 21,
            global_width: 3.0,
            global_diagonal: 100.0,
        }
    }
}

/// Place the last component of a freshly split mixture.
///
/// Only parameters freed by `mv` are touched. Global means are moved one
/// coordinate at a time to where the target most exceeds the current
/// approximation; each freed latent gets the mean and log-diagonal that make
/// its conditional log-ratio flattest over the scoring grid. Ties keep the
/// copied values.
pub fn init_new_component<T: Target + ?Sized>(
    target: &T,
    mix: &mut MixtureApproximation,
    mv: &BoostMove,
    cfg: &InitConfig,
    grid: &GridConfig,
    inner_samples: usize,
    seed: u64,
    key: u64,
) -> Result<()> {
    if !cfg.enabled {
        return Ok(());
    }
    let p = mix.pattern().clone();
    if mv.frees_global() && p.global_dim() > 0 {
        init_global(target, mix, cfg)?;
    }
    let latents: Vec<usize> = match mv.freed_latents() {
        None => (0..p.n_latents()).collect(),
        Some(s) => s.to_vec(),
    };
    if latents.is_empty() {
        return Ok(());
    }
    match p.kind() {
        BlockKind::Hierarchical => init_latents_hier(target, mix, &latents, cfg, grid, seed, key),
        BlockKind::Markov => init_latents_markov(target, mix, &latents, cfg, grid, inner_samples, seed, key),
    }
}

/// Latent values given the global block, filled in backwards with zero noise.
fn conditional_latent_means(comp: &GaussianComponent, theta_g: &[f64]) -> Result<Vec<f64>> {
    let p = comp.pattern().clone();
    let mut theta = vec![0.0; p.total_dim()];
    theta[p.global_range()].copy_from_slice(theta_g);
    for i in (0..p.n_latents()).rev() {
        let cond = match p.kind() {
            BlockKind::Hierarchical => comp.latent_conditional(i, theta_g)?,
            BlockKind::Markov => {
                let next = (i + 1 < p.n_latents()).then(|| theta[p.latent_range(i + 1)].to_vec());
                comp.latent_conditional_markov(i, next.as_deref(), theta_g)?
            }
        };
        theta[p.latent_range(i)].copy_from_slice(cond.mean.as_slice());
    }
    Ok(theta)
}

fn init_global<T: Target + ?Sized>(
    target: &T,
    mix: &mut MixtureApproximation,
    cfg: &InitConfig,
) -> Result<()> {
    let p = mix.pattern().clone();
    let g = p.global_dim();
    let source = mix.last_component().clone();
    let cov = source.global_marginal()?.covariance();
    let mut theta_g = source.global_mean().to_vec();
    let ratio = |tg: &[f64]| -> Result<f64> {
        let theta = conditional_latent_means(&source, tg)?;
        Ok(target.log_h(&theta)? - mix.logpdf(&theta)?)
    };
    for j in 0..g {
        let sd = cov[(j, j)].sqrt();
        let centre = theta_g[j];
        let mut best = ratio(&theta_g)?;
        let mut best_value = centre;
        for v in linspace(centre - cfg.global_width * sd, centre + cfg.global_width * sd, cfg.global_candidates) {
            let mut tg = theta_g.clone();
            tg[j] = v;
            let r = ratio(&tg)?;
            if r > best + 1e-12 * (1.0 + best.abs()) {
                best = r;
                best_value = v;
            }
        }
        theta_g[j] = best_value;
    }
    let comp = mix.last_component_mut();
    comp.mean[p.global_range()].copy_from_slice(&theta_g);
    comp.factor
        .set_global_log_diagonal(&vec![cfg.global_diagonal.ln(); g]);
    Ok(())
}

/// Best `(mean, log-diagonal)` for one latent block against fixed target terms.
fn search_block(
    comp: &GaussianComponent,
    i: usize,
    shift: &[f64],
    cond: &ConditionalMixture,
    points: &[Vec<f64>],
    terms: &[f64],
    cfg: &InitConfig,
    grid: &GridConfig,
) -> (Vec<f64>, Vec<f64>) {
    let mut mean = comp.latent_mean(i).to_vec();
    let mut log_diag = comp.factor.latent_log_diagonal(i);
    let base_chol = comp.factor.latent_block(i);
    let score = |m: &[f64], ld: &[f64]| {
        let mut chol = base_chol.clone();
        for (j, v) in ld.iter().enumerate() {
            chol[(j, j)] = v.exp();
        }
        let cand: BlockGaussian = shifted_conditional(m, chol, shift);
        let r: Vec<f64> = terms
            .iter()
            .zip(points)
            .map(|(t, b)| t - logpdf_with_last(cond, &cand, b))
            .collect();
        let v = sample_variance(&r);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let means = linspace(grid.lo, grid.hi, cfg.mean_candidates);
    let shifts = linspace(-cfg.diag_shift, cfg.diag_shift, cfg.diag_candidates);
    for j in 0..mean.len() {
        let mut best = score(&mean, &log_diag);
        let (mut bm, mut bd) = (mean[j], log_diag[j]);
        let source_diag = log_diag[j];
        for &m in &means {
            for &s in &shifts {
                let mut mm = mean.clone();
                let mut dd = log_diag.clone();
                mm[j] = m;
                dd[j] = source_diag + s;
                let v = score(&mm, &dd);
                if v < best - 1e-12 * (1.0 + best.abs()) {
                    best = v;
                    bm = m;
                    bd = dd[j];
                }
            }
        }
        mean[j] = bm;
        log_diag[j] = bd;
    }
    (mean, log_diag)
}

fn apply_block(mix: &mut MixtureApproximation, i: usize, mean: &[f64], log_diag: &[f64]) {
    let range = mix.pattern().latent_range(i);
    let comp = mix.last_component_mut();
    comp.mean[range].copy_from_slice(mean);
    comp.factor.set_latent_log_diagonal(i, log_diag);
}

fn new_component_global_draw(mix: &MixtureApproximation, seed: u64, key: u64) -> Vec<f64> {
    let comp = mix.last_component();
    let mut rng = substream(seed, tag::INIT, key, 0);
    let theta = comp.sample(&standard_normals(&mut rng, comp.dim()));
    theta[mix.pattern().global_range()].to_vec()
}

fn init_latents_hier<T: Target + ?Sized>(
    target: &T,
    mix: &mut MixtureApproximation,
    latents: &[usize],
    cfg: &InitConfig,
    grid: &GridConfig,
    seed: u64,
    key: u64,
) -> Result<()> {
    let theta_g = new_component_global_draw(mix, seed, key);
    let values = grid.values();
    let frozen = &*mix;
    let chosen = latents
        .par_iter()
        .map(|&i| {
            let comp = frozen.last_component();
            let cond = frozen.latent_conditional(i, &theta_g)?;
            let centre: Vec<f64> = cond.components.last().expect("non-empty").mean.iter().copied().collect();
            let points = block_points(&values, &centre);
            let terms = points
                .iter()
                .map(|b| target.local_log_factor(i, b, &theta_g))
                .collect::<Result<Vec<f64>>>()?;
            let shift = comp.markov_shift(i, None, &theta_g)?;
            Ok(search_block(comp, i, &shift, &cond, &points, &terms, cfg, grid))
        })
        .collect::<Result<Vec<_>>>()?;
    for (&i, (m, d)) in latents.iter().zip(chosen) {
        apply_block(mix, i, &m, &d);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn init_latents_markov<T: Target + ?Sized>(
    target: &T,
    mix: &mut MixtureApproximation,
    latents: &[usize],
    cfg: &InitConfig,
    grid: &GridConfig,
    inner_samples: usize,
    seed: u64,
    key: u64,
) -> Result<()> {
    let p = mix.pattern().clone();
    let n = p.n_latents();
    let values = grid.values();
    let draw = {
        let comp = mix.last_component();
        let mut rng = substream(seed, tag::INIT, key, 0);
        comp.sample(&standard_normals(&mut rng, comp.dim()))
    };
    let theta_g = draw[p.global_range()].to_vec();
    let mut order = latents.to_vec();
    order.sort_unstable_by(|a, b| b.cmp(a));
    for i in order {
        let mut rng = substream(seed, tag::INIT, key, i as u64 + 1);
        let next = (i + 1 < n).then(|| &draw[p.latent_range(i + 1)]);
        let cache = mix.chain_cache()?;
        let cond = mix.latent_conditional_markov(i, next, &theta_g, &cache)?;
        let prev = if i > 0 {
            predecessor_draws(mix, i, &cond, &theta_g, inner_samples.max(1), &mut rng)?
        } else {
            Vec::new()
        };
        let comp = mix.last_component();
        let centre: Vec<f64> = cond.components.last().expect("non-empty").mean.iter().copied().collect();
        let points = block_points(&values, &centre);
        let terms = chain_target_terms(target, i, &points, next, &theta_g, &prev)?;
        let shift = comp.markov_shift(i, next, &theta_g)?;
        let (m, d) = search_block(comp, i, &shift, &cond, &points, &terms, cfg, grid);
        apply_block(mix, i, &m, &d);
    }
    Ok(())
}
