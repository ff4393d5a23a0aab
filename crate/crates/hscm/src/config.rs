//! TOML configuration files. Field names mirror the library option structs;
//! command-line flags override file values.

use std::path::Path;

use hscm_core::{EstimateOptions, SimConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

/// Benchmark settings: the configurations to run plus shared options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub replicates: usize,
    pub seed: u64,
    pub settings: Vec<SimConfig>,
    pub estimate: EstimateOptions,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            replicates: 20,
            seed: 1,
            settings: Vec::new(),
            estimate: EstimateOptions::default(),
        }
    }
}

pub fn parse<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| AppError::schema(path, e.to_string()))
}

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| AppError::io(p, e))?;
            parse(p, &text)
        }
    }
}
