use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use super::manifest::{to_json, RunManifest};
use crate::boosting::{run_boosting, score_latents, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::math::linspace;
use crate::models::{fmt_f64, Dataset, Model, ModelSpec, Simulation, Target};

pub const DATA_FILE: &str = "data.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const DIAGNOSTICS_SUMMARY_FILE: &str = "diagnostics.json";
pub const DENSITY_FILE: &str = "density.csv";

/// Ground truth written next to simulated data.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct TruthRecord {
    pub seed: u64,
    pub model: ModelSpec,
    pub theta: Vec<f64>,
    pub planted: Vec<usize>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    cfg.model.simulate(cfg.data.seed.unwrap_or(cfg.seed))
}

/// Read the configured data file, or simulate when none is given.
pub fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.data.path {
        Some(p) => Dataset::read_csv(p),
        None => Ok(simulate(cfg)?.dataset),
    }
}

pub fn build_model(cfg: &RunConfig) -> Result<Model> {
    cfg.model.build(&load_data(cfg)?)
}

/// Write `data.csv` and `truth.json` into `out`.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    if cfg.data.path.is_some() {
        return Err(Error::InvalidConfig(
            "simulate needs a synthetic data source, not a data path".into(),
        ));
    }
    let sim = simulate(cfg)?;
    ensure_dir(out)?;
    let data_path = out.join(DATA_FILE);
    sim.dataset.write_csv(&data_path)?;
    let truth = TruthRecord {
        seed: cfg.data.seed.unwrap_or(cfg.seed),
        model: cfg.model.clone(),
        theta: sim.theta,
        planted: sim.planted,
    };
    let truth_path = out.join(TRUTH_FILE);
    write_text(&truth_path, &to_json(&truth)?)?;
    Ok(vec![data_path, truth_path])
}

/// Run the boosting loop and write `manifest.json` into `out`.
pub fn cmd_fit(cfg: &RunConfig, out: &Path, psis: bool) -> Result<RunManifest> {
    cfg.validate()?;
    let model = build_model(cfg)?;
    let mut boosting = cfg.boosting.clone();
    if psis {
        boosting.score.psis_draws = Some(cfg.psis_draws);
    }
    let result = run_boosting(&model, &boosting, cfg.seed)?;
    let manifest = RunManifest::new(cfg.clone(), &result);
    ensure_dir(out)?;
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Re-score the saved mixture and write the per-latent table.
pub fn cmd_diagnose(cfg: &RunConfig, out: &Path, psis: bool) -> Result<DiagnosticsReport> {
    cfg.validate()?;
    let manifest = RunManifest::load(&out.join(MANIFEST_FILE))?;
    let mix = manifest.mixture.to_mixture()?;
    let model = build_model(cfg)?;
    if model.pattern() != mix.pattern() {
        return Err(Error::PatternMismatch(
            "the saved mixture does not match the model built from the data".into(),
        ));
    }
    let mut score = cfg.boosting.score.clone();
    score.psis_draws = psis.then_some(cfg.psis_draws);
    let report = score_latents(&model, &mix, &score, cfg.seed, manifest.score_key)?;

    let mut csv = String::from(if psis {
        "latent,score,rank,khat\n"
    } else {
        "latent,score,rank\n"
    });
    let mut rank = vec![0; report.scores.len()];
    for (r, &i) in report.ranking.iter().enumerate() {
        rank[i] = r + 1;
    }
    for (i, s) in report.scores.iter().enumerate() {
        csv.push_str(&format!("{i},{},{}", fmt_f64(*s), rank[i]));
        if let Some(k) = &report.khat {
            csv.push_str(&format!(",{}", fmt_f64(k[i])));
        }
        csv.push('\n');
    }
    write_text(&out.join(DIAGNOSTICS_FILE), &csv)?;
    write_text(&out.join(DIAGNOSTICS_SUMMARY_FILE), &to_json(&report)?)?;
    Ok(report)
}

/// Marginal density grids of the configured latents and global coordinates.
pub fn cmd_export_density(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let manifest = RunManifest::load(&out.join(MANIFEST_FILE))?;
    let mix = manifest.mixture.to_mixture()?;
    let p = mix.pattern().clone();
    let mut targets: Vec<(&str, usize, usize, usize)> = Vec::new();
    for &i in &cfg.export.latents {
        if i >= p.n_latents() {
            return Err(Error::LatentIndex {
                index: i,
                len: p.n_latents(),
            });
        }
        for (c, j) in p.latent_range(i).enumerate() {
            targets.push(("latent", i, c, j));
        }
    }
    for &g in &cfg.export.globals {
        if g >= p.global_dim() {
            return Err(Error::InvalidConfig(format!(
                "global coordinate {g} out of range for {} global parameters",
                p.global_dim()
            )));
        }
        targets.push(("global", g, 0, p.global_range().start + g));
    }
    let mut csv = String::from("target,index,coordinate,x,density\n");
    for (kind, index, coord, j) in targets {
        let xs = match &cfg.export.grid {
            Some(g) => g.values(),
            None => {
                let parts = mix.coordinate_marginal(j)?;
                let w = cfg.export.width;
                let lo = parts.iter().map(|&(_, m, s)| m - w * s).fold(f64::INFINITY, f64::min);
                let hi = parts.iter().map(|&(_, m, s)| m + w * s).fold(f64::NEG_INFINITY, f64::max);
                linspace(lo, hi, cfg.export.points)
            }
        };
        let dens = mix.coordinate_density(j, &xs)?;
        for (x, d) in xs.iter().zip(dens) {
            csv.push_str(&format!("{kind},{index},{coord},{},{}\n", fmt_f64(*x), fmt_f64(d)));
        }
    }
    ensure_dir(out)?;
    let path = out.join(DENSITY_FILE);
    write_text(&path, &csv)?;
    Ok(path)
}
