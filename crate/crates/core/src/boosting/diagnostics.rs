use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::psis::psis_khat;
use crate::error::{Error, Result};
use crate::math::{linspace, log_mean_exp, log_sum_exp, mean, sample_variance};
use crate::mixture::{pick, ConditionalMixture, MixtureApproximation};
use crate::models::Target;
use crate::rng::{standard_normals, substream, tag, Rng};
use crate::sparse_chol::{BlockGaussian, BlockKind};

/// Evaluation grid for per-latent log-ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lo: -5.0,
            hi: 5.0,
            points: 100,
        }
    }
}

impl GridConfig {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.points)
    }
}

/// Settings for scoring latents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    pub grid: GridConfig,
    /// Draws of the predecessor state per latent for chain models.
    pub inner_samples: usize,
    /// Independent global draws averaged per score.
    pub repeats: usize,
    /// Draws per latent for the tail-shape estimate; `None` disables it.
    pub psis_draws: Option<usize>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            inner_samples: 64,
            repeats: 1,
            psis_draws: None,
        }
    }
}

/// Per-latent misfit scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub scores: Vec<f64>,
    /// Latent indices sorted by decreasing score, lower index first on ties.
    pub ranking: Vec<usize>,
    pub mean_score: f64,
    /// Global draw used by the first repeat.
    pub theta_g: Vec<f64>,
    /// Tail-shape estimates; `-inf` marks a flat tail.
    #[serde(default, deserialize_with = "nonfinite::option_vec")]
    pub khat: Option<Vec<f64>>,
}

/// Accepts `"inf"`, `"-inf"` and `"nan"` strings alongside plain numbers.
pub(crate) mod nonfinite {
    use serde::{Deserialize, Deserializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        Plain(f64),
        Text(String),
        Null(()),
    }

    fn to_f64<E: serde::de::Error>(n: Num) -> Result<f64, E> {
        match n {
            Num::Plain(v) => Ok(v),
            Num::Null(()) => Ok(f64::NAN),
            Num::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("expected a number, found {other:?}"))),
            },
        }
    }

    pub fn option_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        let raw: Option<Vec<Num>> = Option::deserialize(d)?;
        raw.map(|v| v.into_iter().map(to_f64).collect()).transpose()
    }
}

/// Rule for picking the latents freed by a local move.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum SubsetRule {
    TopJ(usize),
    Threshold(f64),
}

impl DiagnosticsReport {
    pub fn new(scores: Vec<f64>, theta_g: Vec<f64>, khat: Option<Vec<f64>>) -> Self {
        let ranking = rank_descending(&scores);
        let mean_score = if scores.is_empty() { 0.0 } else { mean(&scores) };
        Self {
            scores,
            ranking,
            mean_score,
            theta_g,
            khat,
        }
    }
}

pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Choose latents from a report. A threshold that selects nothing falls back
/// to the single top latent and returns a warning.
pub fn select_subset(report: &DiagnosticsReport, rule: &SubsetRule) -> (Vec<usize>, Option<String>) {
    match *rule {
        SubsetRule::TopJ(j) => {
            let mut s: Vec<usize> = report.ranking.iter().copied().take(j).collect();
            s.sort_unstable();
            (s, None)
        }
        SubsetRule::Threshold(c) => {
            let s: Vec<usize> = (0..report.scores.len())
                .filter(|&i| report.scores[i] > c)
                .collect();
            if s.is_empty() {
                let fallback = report.ranking.iter().copied().take(1).collect();
                (
                    fallback,
                    Some(format!("no latent scored above {c}; using the top latent")),
                )
            } else {
                (s, None)
            }
        }
    }
}

/// Points at which a latent block's log-ratio is evaluated: the grid itself
/// for scalars, otherwise each coordinate swept with the rest held at `center`.
pub(crate) fn block_points(grid: &[f64], center: &[f64]) -> Vec<Vec<f64>> {
    if center.len() == 1 {
        return grid.iter().map(|&g| vec![g]).collect();
    }
    let mut pts = Vec::with_capacity(grid.len() * center.len());
    for j in 0..center.len() {
        for &g in grid {
            let mut p = center.to_vec();
            p[j] = g;
            pts.push(p);
        }
    }
    pts
}

fn global_draw(mix: &MixtureApproximation, rng: &mut Rng) -> Vec<f64> {
    let top = mix.component(mix.top_component());
    let eps = standard_normals(rng, mix.dim());
    let theta = top.sample(&eps);
    theta[mix.pattern().global_range()].to_vec()
}

/// Score every latent of a hierarchical model by the grid variance of
/// `log p(b_i | theta_G) p(y_i | b_i, theta_G) - log q(b_i | theta_G)`.
pub fn score_latents_hier<T: Target + ?Sized>(
    target: &T,
    mix: &MixtureApproximation,
    cfg: &ScoreConfig,
    seed: u64,
    key: u64,
) -> Result<DiagnosticsReport> {
    if mix.pattern().kind() != BlockKind::Hierarchical {
        return Err(Error::WrongPatternKind {
            expected: "hierarchical",
        });
    }
    let n = mix.pattern().n_latents();
    let grid = cfg.grid.values();
    let repeats = cfg.repeats.max(1);
    let mut totals = vec![0.0; n];
    let mut first_theta = Vec::new();
    let mut khat = None;
    for rep in 0..repeats {
        let mut rng = substream(seed, tag::SCORE, key, rep as u64);
        let theta_g = global_draw(mix, &mut rng);
        let scores: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let cond = mix.latent_conditional(i, &theta_g)?;
                let center = top_center(mix, &cond);
                let r = block_points(&grid, &center)
                    .iter()
                    .map(|b| Ok(target.local_log_factor(i, b, &theta_g)? - cond.logpdf(b)))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(sample_variance(&r))
            })
            .collect::<Result<_>>()?;
        for (t, s) in totals.iter_mut().zip(scores) {
            *t += s;
        }
        if rep == 0 {
            if let Some(draws) = cfg.psis_draws {
                khat = Some(
                    (0..n)
                        .into_par_iter()
                        .map(|i| {
                            let mut r = substream(seed, tag::PSIS, key, i as u64);
                            let cond = mix.latent_conditional(i, &theta_g)?;
                            let lr = (0..draws)
                                .map(|_| {
                                    let b = cond.sample(&mut r);
                                    Ok(target.local_log_factor(i, &b, &theta_g)? - cond.logpdf(&b))
                                })
                                .collect::<Result<Vec<f64>>>()?;
                            psis_khat(&lr)
                        })
                        .collect::<Result<Vec<f64>>>()?,
                );
            }
            first_theta = theta_g;
        }
    }
    let scores = totals.iter().map(|t| t / repeats as f64).collect();
    Ok(DiagnosticsReport::new(scores, first_theta, khat))
}

fn top_center(mix: &MixtureApproximation, cond: &ConditionalMixture) -> Vec<f64> {
    cond.components[mix.top_component()]
        .mean
        .iter()
        .copied()
        .collect()
}

/// Candidate-independent part of the chain log-ratio for latent `i` on a set
/// of points: successor transition, emission and a Monte Carlo average of the
/// incoming transition over predecessor draws.
pub(crate) fn chain_target_terms<T: Target + ?Sized>(
    target: &T,
    i: usize,
    points: &[Vec<f64>],
    next: Option<&[f64]>,
    theta_g: &[f64],
    prev_draws: &[Vec<f64>],
) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|b| {
            let succ = match next {
                Some(nb) => target.chain_log_factors(i + 1, Some(b), nb, theta_g)?.0,
                None => 0.0,
            };
            let (incoming, emission) = if i == 0 {
                target.chain_log_factors(0, None, b, theta_g)?
            } else {
                let mut trans = Vec::with_capacity(prev_draws.len());
                let mut emission = 0.0;
                for p in prev_draws {
                    let (t, e) = target.chain_log_factors(i, Some(p), b, theta_g)?;
                    trans.push(t);
                    emission = e;
                }
                (log_mean_exp(&trans), emission)
            };
            Ok(succ + incoming + emission)
        })
        .collect()
}

/// Draws of latent `i - 1` given latent `i + 1` and the globals, obtained by
/// sampling latent `i` and then its predecessor from the same component.
pub(crate) fn predecessor_draws(
    mix: &MixtureApproximation,
    i: usize,
    cond: &ConditionalMixture,
    theta_g: &[f64],
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    let w = cond.weights();
    (0..count)
        .map(|_| {
            let k = pick(&w, rand::Rng::random(rng));
            let bi = cond.components[k].sample(&standard_normals(rng, cond.components[k].dim()));
            let prev = mix
                .component(k)
                .latent_conditional_markov(i - 1, Some(&bi), theta_g)?;
            Ok(prev.sample(&standard_normals(rng, prev.dim())))
        })
        .collect()
}

/// Score every state of a chain model by the grid variance of the
/// Monte Carlo log-ratio against `q(b_i | b_{i+1}, theta_G)`.
pub fn score_latents_markov<T: Target + ?Sized>(
    target: &T,
    mix: &MixtureApproximation,
    cfg: &ScoreConfig,
    seed: u64,
    key: u64,
) -> Result<DiagnosticsReport> {
    if mix.pattern().kind() != BlockKind::Markov {
        return Err(Error::WrongPatternKind { expected: "markov" });
    }
    let p = mix.pattern().clone();
    let n = p.n_latents();
    let grid = cfg.grid.values();
    let cache = mix.chain_cache()?;
    let repeats = cfg.repeats.max(1);
    let mut totals = vec![0.0; n];
    let mut first_theta = Vec::new();
    for rep in 0..repeats {
        let mut rng = substream(seed, tag::SCORE, key, rep as u64);
        let top = mix.component(mix.top_component());
        let draw = top.sample(&standard_normals(&mut rng, mix.dim()));
        let theta_g = draw[p.global_range()].to_vec();
        let scores: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut r = substream(seed, tag::SCORE, key, ((rep as u64) << 32) | (i as u64 + 1));
                let next = (i + 1 < n).then(|| &draw[p.latent_range(i + 1)]);
                let cond = mix.latent_conditional_markov(i, next, &theta_g, &cache)?;
                let prev = if i > 0 {
                    predecessor_draws(mix, i, &cond, &theta_g, cfg.inner_samples.max(1), &mut r)?
                } else {
                    Vec::new()
                };
                let center = top_center(mix, &cond);
                let points = block_points(&grid, &center);
                let terms = chain_target_terms(target, i, &points, next, &theta_g, &prev)?;
                let ratios: Vec<f64> = terms
                    .iter()
                    .zip(&points)
                    .map(|(t, b)| t - cond.logpdf(b))
                    .collect();
                Ok(sample_variance(&ratios))
            })
            .collect::<Result<_>>()?;
        for (t, s) in totals.iter_mut().zip(scores) {
            *t += s;
        }
        if rep == 0 {
            first_theta = theta_g;
        }
    }
    let scores = totals.iter().map(|t| t / repeats as f64).collect();
    Ok(DiagnosticsReport::new(scores, first_theta, None))
}

/// Dispatch on the pattern kind.
pub fn score_latents<T: Target + ?Sized>(
    target: &T,
    mix: &MixtureApproximation,
    cfg: &ScoreConfig,
    seed: u64,
    key: u64,
) -> Result<DiagnosticsReport> {
    match mix.pattern().kind() {
        BlockKind::Hierarchical => score_latents_hier(target, mix, cfg, seed, key),
        BlockKind::Markov => score_latents_markov(target, mix, cfg, seed, key),
    }
}

/// Log-density of a conditional mixture where the last component's Gaussian
/// is replaced by `last`.
pub(crate) fn logpdf_with_last(cond: &ConditionalMixture, last: &BlockGaussian, b: &[f64]) -> f64 {
    let k = cond.components.len();
    let terms: Vec<f64> = (0..k)
        .map(|j| {
            let g = if j + 1 == k { last } else { &cond.components[j] };
            cond.log_weights[j] + g.logpdf(b)
        })
        .collect();
    log_sum_exp(&terms)
}
