//! Optional JSON config file with per-subcommand defaults.
//!
//! Precedence is flag > file > built-in default: every key mirrors a flag of
//! the same name, and unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use lbrank::{Error, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub queries: Option<usize>,
    pub seed: Option<u64>,
    pub profiles: Option<Vec<String>>,
    pub latent_spread: Option<f64>,
    pub softmax: Option<bool>,
    pub name: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFileConfig {
    pub model: Option<String>,
    pub g: Option<String>,
    pub lambda: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub mu: Option<f64>,
    pub epochs: Option<usize>,
    pub batch: Option<String>,
    pub tol: Option<f64>,
    pub k2: Option<usize>,
    pub phi1: Option<String>,
    pub phi2: Option<String>,
    pub gradient_mode: Option<String>,
    pub sense: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub discount: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub n_grid: Option<String>,
    pub k: Option<usize>,
    pub k2: Option<usize>,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub generate: GenerateConfig,
    #[serde(default)]
    pub train: TrainFileConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text).map_err(|e| {
                    Error::InvalidConfig(format!("config file {}: {e}", p.display()))
                })
            }
        }
    }
}

/// Flag beats file beats built-in default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
