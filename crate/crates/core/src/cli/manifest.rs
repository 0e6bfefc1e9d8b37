use std::io;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::boosting::{BoostRecord, BoostingResult, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::mixture::MixtureApproximation;
use crate::optimizer::{ElboEstimate, SgaReport};
use crate::sparse_chol::{BlockPattern, GaussianComponent, Layout, SparseCholeskyFactor};

/// One mixture component in packed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub mean: Vec<f64>,
    /// Packed factor with log-scale diagonals.
    pub factor: Vec<f64>,
}

/// Serialised mixture. Weights are informative; reloading uses the exact
/// log-ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub pattern: BlockPattern,
    pub weights: Vec<f64>,
    pub log_ratios: Vec<f64>,
    pub components: Vec<ComponentRecord>,
}

impl MixtureRecord {
    pub fn from_mixture(mix: &MixtureApproximation) -> Self {
        Self {
            pattern: mix.pattern().clone(),
            weights: mix.weights(),
            log_ratios: mix.log_ratios().to_vec(),
            components: mix
                .components()
                .iter()
                .map(|c| ComponentRecord {
                    mean: c.mean.clone(),
                    factor: c.factor.pack(),
                })
                .collect(),
        }
    }

    pub fn to_mixture(&self) -> Result<MixtureApproximation> {
        let p = &self.pattern;
        let pattern = BlockPattern::new(p.kind(), p.latent_dims().to_vec(), p.global_dim())?;
        let layout = Arc::new(Layout::new(&pattern));
        let components = self
            .components
            .iter()
            .map(|c| {
                let factor = SparseCholeskyFactor::unpack(layout.clone(), c.factor.clone())?;
                GaussianComponent::new(c.mean.clone(), factor)
            })
            .collect::<Result<Vec<_>>>()?;
        MixtureApproximation::from_log_ratios(components, self.log_ratios.clone())
    }
}

/// Single-component starting fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialFit {
    pub elbo: ElboEstimate,
    pub mean_score: f64,
    pub trace: SgaReport,
}

/// Everything a fit produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub initial: InitialFit,
    pub records: Vec<BoostRecord>,
    pub mean_scores: Vec<f64>,
    pub optimal_k: usize,
    /// Stream key of the last scoring pass, for reproducing it.
    pub score_key: u64,
    pub final_diagnostics: DiagnosticsReport,
    pub mixture: MixtureRecord,
}

impl RunManifest {
    pub fn new(config: RunConfig, result: &BoostingResult) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            initial: InitialFit {
                elbo: result.initial_elbo,
                mean_score: result.initial_diagnostics.mean_score,
                trace: result.initial_trace.clone(),
            },
            records: result.records.clone(),
            mean_scores: result.mean_scores.clone(),
            optimal_k: result.optimal_k,
            score_key: result.records.len() as u64,
            final_diagnostics: result.final_diagnostics.clone(),
            mixture: MixtureRecord::from_mixture(&result.mixture),
            config,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Pretty JSON writer that prints every float with 17 significant digits.
struct SeventeenDigits(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            write!(w, "{v:.16e}")
        } else {
            write!(w, "\"{}\"", crate::models::fmt_f64(v))
        }
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serialise any value as pretty JSON with 17-significant-digit floats.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = SeventeenDigits(serde_json::ser::PrettyFormatter::new());
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Format(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}
