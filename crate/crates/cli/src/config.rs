//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "family": {"type": "bernoulli"},
//!   "means": [0.6, 0.4],
//!   "algorithms": ["dkl_ucb", "klucb_stop"],
//!   "deltas": [0.1, 0.01],
//!   "trials": 500,
//!   "seed": 7,
//!   "horizon_cap": 10000000,
//!   "parallelism": 4,
//!   "output": {"format": "csv", "path": "results.csv"}
//! }
//! ```
//!
//! A Gaussian family carries its variance:
//! `{"type": "gaussian", "params": {"variance": 1.0}}`.

use std::path::{Path, PathBuf};

use bai_core::dkl_ucb::{SamplingRule, DEFAULT_HORIZON_CAP};
use bai_core::{BanditInstance, ExperimentConfig, RewardFamily};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: Format,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub family: RewardFamily,
    pub means: Vec<f64>,
    #[serde(default)]
    pub algorithms: Vec<String>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub horizon_cap: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_trials() -> u64 {
    1
}

fn default_cap() -> u64 {
    DEFAULT_HORIZON_CAP
}

fn default_parallelism() -> usize {
    1
}

/// A parsed config together with the SHA-256 of its raw bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    pub hash: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&bytes)
}

pub fn parse(bytes: &[u8]) -> Result<LoadedConfig, CliError> {
    let file: ConfigFile =
        serde_json::from_slice(bytes).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(LoadedConfig {
        file,
        hash: hex::encode(Sha256::digest(bytes)),
    })
}

impl ConfigFile {
    pub fn instance(&self) -> Result<BanditInstance, CliError> {
        Ok(BanditInstance::new(self.family, self.means.clone())?)
    }

    /// Build the campaign, with `threads` (from `BAI_THREADS`) overriding
    /// the configured parallelism.
    pub fn experiment(&self, threads: Option<usize>) -> Result<ExperimentConfig, CliError> {
        let algorithms = self
            .algorithms
            .iter()
            .map(|name| {
                SamplingRule::from_name(name).ok_or_else(|| {
                    let known: Vec<_> = SamplingRule::ALL.iter().map(|r| r.name()).collect();
                    CliError::Config(format!(
                        "unknown algorithm {name:?}; expected one of {}",
                        known.join(", ")
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let config = ExperimentConfig {
            instance: self.instance()?,
            algorithms,
            deltas: self.deltas.clone(),
            trials_per_cell: self.trials,
            base_seed: self.seed,
            horizon_cap: self.horizon_cap,
            parallelism: threads.unwrap_or(self.parallelism),
        };
        config.validate()?;
        Ok(config)
    }
}
