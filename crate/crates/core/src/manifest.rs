use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frozen dataset statistics used to score frames consistently.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawManifest", into = "RawManifest")]
pub struct DatasetManifest {
    d_max: f64,
    raw_min: f64,
    raw_max: f64,
    frame_count: usize,
    pipeline_config_hash: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawManifest {
    d_max: f64,
    raw_min: f64,
    raw_max: f64,
    frame_count: usize,
    pipeline_config_hash: String,
}

impl TryFrom<RawManifest> for DatasetManifest {
    type Error = Error;

    fn try_from(r: RawManifest) -> Result<Self> {
        DatasetManifest::new(r.d_max, r.raw_min, r.raw_max, r.frame_count, r.pipeline_config_hash)
    }
}

impl From<DatasetManifest> for RawManifest {
    fn from(m: DatasetManifest) -> Self {
        RawManifest {
            d_max: m.d_max,
            raw_min: m.raw_min,
            raw_max: m.raw_max,
            frame_count: m.frame_count,
            pipeline_config_hash: m.pipeline_config_hash,
        }
    }
}

impl DatasetManifest {
    pub fn new(
        d_max: f64,
        raw_min: f64,
        raw_max: f64,
        frame_count: usize,
        pipeline_config_hash: impl Into<String>,
    ) -> Result<Self> {
        if !(d_max.is_finite() && d_max > 0.0) {
            return Err(Error::InvalidManifest(format!("d_max must be positive, got {d_max}")));
        }
        if !(raw_min.is_finite() && raw_max.is_finite() && raw_max >= raw_min) {
            return Err(Error::InvalidManifest(format!(
                "raw range [{raw_min}, {raw_max}] is not ordered"
            )));
        }
        if frame_count < 1 {
            return Err(Error::InvalidManifest("frame_count must be at least 1".into()));
        }
        Ok(Self {
            d_max,
            raw_min,
            raw_max,
            frame_count,
            pipeline_config_hash: pipeline_config_hash.into(),
        })
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn raw_min(&self) -> f64 {
        self.raw_min
    }

    pub fn raw_max(&self) -> f64 {
        self.raw_max
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn pipeline_config_hash(&self) -> &str {
        &self.pipeline_config_hash
    }
}

pub fn save_manifest(m: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        if e.is_data() || e.is_syntax() || e.is_eof() {
            Error::SchemaMismatch {
                path: path.to_path_buf(),
                reason: e.to_string(),
            }
        } else {
            Error::Json(e)
        }
    })
}
