//! Plain-text run configuration.
//!
//! The file is `key = value` lines (TOML syntax, `#` comments). Command-line flags win over the
//! file, and the file wins over built-in defaults. Every resolved value is recorded so the
//! manifest can describe the run completely.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Length units for sigma and isovalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Multiples of the grid spacing
    Voxel,
    /// World-space length
    World,
}

impl Display for Units {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Units::Voxel => "voxel",
            Units::World => "world",
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub sigma: Option<f64>,
    pub sigma_units: Option<Units>,
    pub isovalue_units: Option<Units>,
    pub truncation: Option<f64>,
    pub eps_p: Option<f64>,
    pub alpha: Option<f64>,
    pub density_scale: Option<f64>,
    pub eps_d: Option<f64>,
    pub step: Option<f64>,
    pub albedo: Option<[f64; 3]>,
    pub isovalue: Option<f64>,
    pub seed: Option<u64>,
    pub mc_samples: Option<usize>,
    pub mc_alpha: Option<f64>,
    pub samples: Option<usize>,
    pub iters: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub init: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })
    }
}

/// Merges flags over the config file and remembers what was chosen.
#[derive(Debug, Default)]
pub struct Resolver {
    pub file: FileConfig,
    pub resolved: BTreeMap<&'static str, String>,
}

impl Resolver {
    pub fn new(file: FileConfig) -> Self {
        Resolver {
            file,
            resolved: BTreeMap::new(),
        }
    }

    pub fn pick<T: Display>(
        &mut self,
        key: &'static str,
        flag: Option<T>,
        file: impl FnOnce(&FileConfig) -> Option<T>,
        default: T,
    ) -> T {
        let value = flag.or_else(|| file(&self.file)).unwrap_or(default);
        self.resolved.insert(key, value.to_string());
        value
    }

    pub fn record(&mut self, key: &'static str, value: impl Display) {
        self.resolved.insert(key, value.to_string());
    }

    /// Canonical `key = value` lines of everything resolved so far.
    pub fn canonical(&self) -> String {
        self.resolved
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
