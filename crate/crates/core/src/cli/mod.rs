//! Command-line front end: configuration, data files, run manifests and
//! density grids.

mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    build_model, cmd_diagnose, cmd_export_density, cmd_fit, cmd_simulate, load_data, TruthRecord,
    DATA_FILE, DENSITY_FILE, DIAGNOSTICS_FILE, DIAGNOSTICS_SUMMARY_FILE, MANIFEST_FILE, TRUTH_FILE,
};
pub use config::{DataSource, ExportConfig, RunConfig};
pub use manifest::{to_json, ComponentRecord, InitialFit, MixtureRecord, RunManifest};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "mixboost", version, about = "Boosting variational inference with block-sparse Gaussian mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration in TOML.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory; overrides the configured one.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Add tail-shape estimates to the latent scores.
    #[arg(long, global = true)]
    pub psis: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset and its ground truth.
    Simulate,
    /// Fit the boosted mixture and write the run manifest.
    Fit,
    /// Re-score the latents of a saved fit.
    Diagnose,
    /// Write marginal density grids of a saved fit.
    ExportDensity,
}

impl Cli {
    /// Load the configuration and apply command-line overrides.
    pub fn resolve(&self) -> Result<(RunConfig, PathBuf)> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("--config PATH is required".into()))?;
        let mut cfg = RunConfig::load(path)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg, out))
    }

    pub fn execute(&self) -> Result<serde_json::Value> {
        let (cfg, out) = self.resolve()?;
        let json = |files: Vec<PathBuf>| {
            serde_json::json!({
                "status": "ok",
                "command": self.command_name(),
                "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            })
        };
        let run = || -> Result<serde_json::Value> {
            Ok(match self.command {
                Command::Simulate => json(cmd_simulate(&cfg, &out)?),
                Command::Fit => {
                    let m = cmd_fit(&cfg, &out, self.psis)?;
                    let mut v = json(vec![out.join(MANIFEST_FILE)]);
                    v["optimal_k"] = m.optimal_k.into();
                    v
                }
                Command::Diagnose => {
                    cmd_diagnose(&cfg, &out, self.psis)?;
                    json(vec![out.join(DIAGNOSTICS_FILE), out.join(DIAGNOSTICS_SUMMARY_FILE)])
                }
                Command::ExportDensity => json(vec![cmd_export_density(&cfg, &out)?]),
            })
        };
        match self.threads {
            Some(0) => Err(Error::InvalidConfig("--threads must be positive".into())),
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?
                .install(run),
            None => run(),
        }
    }

    pub fn command_name(&self) -> &'static str {
        match self.command {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Diagnose => "diagnose",
            Command::ExportDensity => "export-density",
        }
    }
}

/// Machine-readable error record.
pub fn error_record(kind: &str, message: &str, path: Option<&std::path::Path>) -> String {
    let mut v = serde_json::json!({ "status": "error", "kind": kind, "message": message });
    if let Some(p) = path {
        v["path"] = p.display().to_string().into();
    }
    v.to_string()
}

fn record_for(err: &Error) -> String {
    let path = match err {
        Error::Io { path, .. } => Some(path.as_path()),
        _ => None,
    };
    error_record(err.kind(), &err.to_string(), path)
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", error_record("usage", e.to_string().trim(), None));
            return 2;
        }
    };
    match cli.execute() {
        Ok(v) => {
            println!("{v}");
            0
        }
        Err(e) => {
            eprintln!("{}", record_for(&e));
            1
        }
    }
}
