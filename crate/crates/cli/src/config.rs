//! One TOML file for every tunable, with dotted `--set` overrides.

use std::path::Path;

use igo_core::{BinningConfig, PoolingConfig, SaliencyConfig, SceneRanges, ScoringConfig};
use igo_regressor::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "IGO_PQA_CONFIG";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub saliency: SaliencyConfig,
    pub pooling: PoolingConfig,
    pub binning: BinningConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: SceneRanges,
}

impl PipelineConfig {
    /// Reads `path` (or the defaults when `None`) and applies `key=value`
    /// overrides, e.g. `train.epochs=5` or `model.positional_encoding="none"`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                text.parse()
                    .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {}", p.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scoring(&self) -> ScoringConfig {
        ScoringConfig {
            saliency: self.saliency.clone(),
            pooling: self.pooling.clone(),
            binning: self.binning.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scoring().validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.model.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let s = &self.synth;
        if !(s.density.0 > 0.0 && s.density.0 <= s.density.1)
            || !(s.max_range.0 > 0.0 && s.max_range.0 <= s.max_range.1)
            || s.n_objects.0 > s.n_objects.1
            || s.n_cameras == 0
        {
            return Err(CliError::Config(format!("invalid synth ranges {s:?}")));
        }
        Ok(())
    }

    /// Hash recorded in manifests; covers the scoring sections only.
    pub fn config_hash(&self) -> String {
        self.scoring().hash()
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {spec:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("override key {key:?} is empty")));
    }
    // accept any TOML value; bare words fall back to strings
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_owned()));
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("override {key:?}: {p} is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_owned(), value);
    Ok(())
}
