//! The TOML configuration file. Every key is optional; command-line flags win.

use std::fs;
use std::path::{Path, PathBuf};

use crimeflow::synth::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub tz: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub ingest: IngestConfig,
    pub network: NetworkConfig,
    pub features: FeaturesConfig,
    pub explain: ExplainConfig,
    pub forecast: ForecastConfig,
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub data_dir: Option<PathBuf>,
    pub tracts: Option<PathBuf>,
    pub venues: Option<PathBuf>,
    pub category_map: Option<PathBuf>,
    pub transitions: Option<PathBuf>,
    pub checkins: Option<PathBuf>,
    pub crimes: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub pop_min: Option<u64>,
    pub checkin_min: Option<u64>,
    pub filter_year: Option<i32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Custom adjacency edge list (`a,b` tract id pairs) replacing queen contiguity.
    pub adjacency: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub crime_types: Option<Vec<String>>,
    pub activity: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub year: Option<i32>,
    pub activity: Option<bool>,
    pub covariates: Option<bool>,
    pub tolerance: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub train_year: Option<i32>,
    pub eval_year: Option<i32>,
    pub folds: Option<usize>,
    /// `full` or `desk`.
    pub grid: Option<String>,
    pub random_forest: Option<bool>,
    pub elastic_net: Option<bool>,
    pub covariates: Option<bool>,
    pub variants: Option<Vec<String>>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
