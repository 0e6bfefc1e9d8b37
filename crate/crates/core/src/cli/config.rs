use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boosting::{BoostingConfig, GridConfig};
use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Where observations come from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    /// CSV file; when absent the data are simulated from the model.
    pub path: Option<PathBuf>,
    /// Simulation seed; defaults to the run seed.
    pub seed: Option<u64>,
}

/// Which marginals `export-density` writes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub latents: Vec<usize>,
    /// Indices within the global block.
    pub globals: Vec<usize>,
    /// Fixed grid for every target; by default each target gets a range
    /// spanning all components.
    pub grid: Option<GridConfig>,
    /// Points of the automatic grid.
    pub points: usize,
    /// Half-width of the automatic grid in component standard deviations.
    pub width: f64,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            latents: vec![0],
            globals: Vec::new(),
            grid: None,
            points: 401,
            width: 6.0,
        }
    }
}

fn default_psis_draws() -> usize {
    1000
}

/// Everything a command needs, read from one TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub model: ModelSpec,
    #[serde(default)]
    pub data: DataSource,
    #[serde(default)]
    pub boosting: BoostingConfig,
    #[serde(default)]
    pub export: ExportConfig,
    /// Draws per latent for tail-shape estimates when `--psis` is set.
    #[serde(default = "default_psis_draws")]
    pub psis_draws: usize,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative data paths are resolved against the config file
        if let Some(p) = &cfg.data.path {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.data.path = Some(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.boosting.validate()?;
        if let Some(p) = &self.data.path {
            if !p.exists() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "data file not found"),
                ));
            }
        }
        if self.psis_draws < 10 {
            return Err(Error::InvalidConfig("psis_draws must be at least 10".into()));
        }
        if let Some(g) = &self.export.grid {
            if g.points < 2 || !(g.lo < g.hi) {
                return Err(Error::InvalidConfig("export grid needs two points on a nonempty range".into()));
            }
        }
        if self.export.points < 2 || !(self.export.width > 0.0) {
            return Err(Error::InvalidConfig("export points and width must be positive".into()));
        }
        Ok(())
    }
}
