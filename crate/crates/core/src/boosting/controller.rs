use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::diagnostics::{score_latents, select_subset, DiagnosticsReport, ScoreConfig, SubsetRule};
use super::init::{init_new_component, InitConfig};
use super::moves::BoostMove;
use crate::error::{Error, Result};
use crate::mixture::MixtureApproximation;
use crate::models::Target;
use crate::optimizer::{estimate_elbo, run_sga, ElboEstimate, FreeMask, SgaConfig, SgaReport};
use crate::rng::{substream, tag};

/// How moves are chosen at each boost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum Schedule {
    AllGlobal,
    /// Global-block move with probability `p_global_block`, otherwise a
    /// latent-subset move.
    LocalMix { p_global_block: f64 },
    /// A global-block move followed by a latent-subset move.
    BothEachIteration,
}

impl Default for Schedule {
    fn default() -> Self {
        Self::LocalMix {
            p_global_block: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostingConfig {
    pub k_max: usize,
    pub schedule: Schedule,
    pub subset: SubsetRule,
    pub split: f64,
    /// Boosts without a lower mean score before stopping.
    pub patience: usize,
    pub elbo_samples: usize,
    pub score: ScoreConfig,
    pub init: InitConfig,
    /// Optimiser for the single-component fit.
    pub initial_sga: SgaConfig,
    /// Optimiser for each boost.
    pub sga: SgaConfig,
}

impl Default for BoostingConfig {
    fn default() -> Self {
        Self {
            k_max: 6,
            schedule: Schedule::default(),
            subset: SubsetRule::TopJ(20),
            split: 0.5,
            patience: 3,
            elbo_samples: 1000,
            score: ScoreConfig::default(),
            init: InitConfig::default(),
            initial_sga: SgaConfig::default(),
            sga: SgaConfig::default(),
        }
    }
}

impl BoostingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.k_max == 0 {
            return bad("k_max must be at least 1");
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad("split must lie in (0, 1)");
        }
        if let Schedule::LocalMix { p_global_block } = self.schedule {
            if !(0.0..=1.0).contains(&p_global_block) {
                return bad("p_global_block must lie in [0, 1]");
            }
        }
        match self.subset {
            SubsetRule::TopJ(0) => return bad("subset size must be positive"),
            SubsetRule::Threshold(t) if !t.is_finite() => return bad("threshold must be finite"),
            _ => {}
        }
        if self.score.grid.points < 2 || !(self.score.grid.lo < self.score.grid.hi) {
            return bad("grid needs at least two points on a nonempty range");
        }
        if self.elbo_samples < 2 || self.sga.samples == 0 || self.initial_sga.samples == 0 {
            return bad("sample counts must be positive");
        }
        if let Some(d) = self.score.psis_draws {
            if d < 10 {
                return bad("tail-shape estimates need at least 10 draws");
            }
        }
        Ok(())
    }
}

/// Result of adding one component.
#[derive(Clone, Debug)]
pub struct BoostOutcome {
    pub mixture: MixtureApproximation,
    pub sga: SgaReport,
    pub diagnostics: DiagnosticsReport,
}

/// Split the top component, initialise and optimise the copy under `mv`,
/// then re-score the latents.
pub fn boost_step<T: Target + ?Sized>(
    target: &T,
    mix: &MixtureApproximation,
    mv: &BoostMove,
    cfg: &BoostingConfig,
    seed: u64,
    stream: u64,
) -> Result<BoostOutcome> {
    mv.validate(mix.pattern().n_latents())?;
    let mut next = mix.split(cfg.split)?;
    init_new_component(
        target,
        &mut next,
        mv,
        &cfg.init,
        &cfg.score.grid,
        cfg.score.inner_samples,
        seed,
        stream,
    )?;
    let mask = mv.mask(next.layout());
    let sga = run_sga(target, &mut next, &mask, &cfg.sga, seed, stream)?;
    let diagnostics = score_latents(target, &next, &cfg.score, seed, stream)?;
    Ok(BoostOutcome {
        mixture: next,
        sga,
        diagnostics,
    })
}

/// One completed boost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostRecord {
    /// Components after the boost.
    pub k: usize,
    #[serde(rename = "move")]
    pub mv: BoostMove,
    pub elbo_before: ElboEstimate,
    pub elbo_after: ElboEstimate,
    pub trace: SgaReport,
    pub mean_score: f64,
    pub scores: Vec<f64>,
    pub khat: Option<Vec<f64>>,
    pub wall_time_secs: f64,
    pub warning: Option<String>,
}

#[derive(Clone, Debug)]
pub struct BoostingResult {
    pub mixture: MixtureApproximation,
    /// Mixture with the lowest mean score.
    pub best_mixture: MixtureApproximation,
    /// Fit and diagnostics of the single-component start.
    pub initial_trace: SgaReport,
    pub initial_diagnostics: DiagnosticsReport,
    pub initial_elbo: ElboEstimate,
    pub records: Vec<BoostRecord>,
    /// Mean score after each fit, starting with the single component.
    pub mean_scores: Vec<f64>,
    /// Component count with the lowest mean score.
    pub optimal_k: usize,
    pub final_diagnostics: DiagnosticsReport,
}

/// Fit one Gaussian, then add components until `k_max` is reached or the
/// mean score stops improving.
///
/// Stream 0 is the single-component fit; boost `b` uses stream `b`.
pub fn run_boosting<T: Target + ?Sized>(
    target: &T,
    cfg: &BoostingConfig,
    seed: u64,
) -> Result<BoostingResult> {
    cfg.validate()?;
    let layout_mix = MixtureApproximation::standard(target.pattern());
    let mut mix = layout_mix;
    let mask = FreeMask::all(mix.layout(), false);
    let initial_trace = run_sga(target, &mut mix, &mask, &cfg.initial_sga, seed, 0)?;
    let mut report = score_latents(target, &mix, &cfg.score, seed, 0)?;
    let initial_diagnostics = report.clone();
    let mut elbo = estimate_elbo(target, &mix, cfg.elbo_samples, seed, 0)?;
    let initial_elbo = elbo;

    let mut mean_scores = vec![report.mean_score];
    let mut best_mixture = mix.clone();
    let mut best_score = report.mean_score;
    let mut optimal_k = 1;
    let mut stale = 0;
    let mut records = Vec::new();
    let mut stream = 0u64;

    'outer: while mix.n_components() < cfg.k_max {
        let mut sched = substream(seed, tag::SCHEDULE, stream + 1, 0);
        let kinds: Vec<bool> = match cfg.schedule {
            Schedule::AllGlobal => vec![false],
            Schedule::LocalMix { p_global_block } => vec![sched.random::<f64>() < p_global_block],
            Schedule::BothEachIteration => vec![true, false],
        };
        for global_block in kinds {
            if mix.n_components() >= cfg.k_max {
                break 'outer;
            }
            stream += 1;
            let started = Instant::now();
            let (mv, warning) = match (&cfg.schedule, global_block) {
                (Schedule::AllGlobal, _) => (BoostMove::Global, None),
                (_, true) => (BoostMove::GlobalBlock, None),
                (_, false) => {
                    let (subset, w) = select_subset(&report, &cfg.subset);
                    (BoostMove::LatentSubset(subset), w)
                }
            };
            let out = boost_step(target, &mix, &mv, cfg, seed, stream)?;
            let after = estimate_elbo(target, &out.mixture, cfg.elbo_samples, seed, stream)?;
            mix = out.mixture;
            report = out.diagnostics;
            mean_scores.push(report.mean_score);
            records.push(BoostRecord {
                k: mix.n_components(),
                mv,
                elbo_before: elbo,
                elbo_after: after,
                trace: out.sga,
                mean_score: report.mean_score,
                scores: report.scores.clone(),
                khat: report.khat.clone(),
                wall_time_secs: started.elapsed().as_secs_f64(),
                warning,
            });
            elbo = after;
            if report.mean_score < best_score {
                best_score = report.mean_score;
                best_mixture = mix.clone();
                optimal_k = mix.n_components();
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience.max(1) {
                    break 'outer;
                }
            }
        }
    }

    Ok(BoostingResult {
        mixture: mix,
        best_mixture,
        initial_trace,
        initial_diagnostics,
        initial_elbo,
        records,
        mean_scores,
        optimal_k,
        final_diagnostics: report,
    })
}
