//! Tunables for the scoring pipeline.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaliencyConfig {
    /// Box half-widths of the center windows, paired index-wise with `surround_radii`.
    pub center_radii: Vec<usize>,
    pub surround_radii: Vec<usize>,
    /// Multiplicative boost inside projected object boxes: `v' = min(1, v·(1+gain))`.
    pub object_gain: f64,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        Self {
            center_radii: vec![1, 2, 4, 8],
            surround_radii: vec![2, 4, 8, 16],
            object_gain: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolingConfig {
    /// Truncation radius of the Gaussian disc, image pixels.
    pub radius: f64,
    /// Kernel standard deviation, image pixels.
    pub sigma: f64,
    /// Canvas downsample factor (1 = full camera resolution).
    pub downsample: u32,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        Self {
            radius: 5.0,
            sigma: 2.5,
            downsample: 1,
        }
    }
}

/// Half-open bins: Low `[0, low_upper)`, Medium `[low_upper, high_lower)`, High `[high_lower, 100]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinningConfig {
    pub low_upper: f64,
    pub high_lower: f64,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self {
            low_upper: 34.0,
            high_lower: 67.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub saliency: SaliencyConfig,
    pub pooling: PoolingConfig,
    pub binning: BinningConfig,
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.saliency;
        if s.center_radii.is_empty() || s.center_radii.len() != s.surround_radii.len() {
            return Err(Error::InvalidConfig(
                "saliency center/surround radii must be non-empty and paired".into(),
            ));
        }
        if s.center_radii.iter().zip(&s.surround_radii).any(|(c, r)| c >= r) {
            return Err(Error::InvalidConfig(
                "each surround radius must exceed its center radius".into(),
            ));
        }
        if !(s.object_gain >= 0.0 && s.object_gain.is_finite()) {
            return Err(Error::InvalidConfig(format!("object gain {} must be >= 0", s.object_gain)));
        }
        let p = &self.pooling;
        if !(p.radius > 0.0 && p.sigma > 0.0 && p.radius.is_finite() && p.sigma.is_finite()) {
            return Err(Error::InvalidConfig("pooling radius and sigma must be positive".into()));
        }
        if p.downsample < 1 {
            return Err(Error::InvalidConfig("pooling downsample must be >= 1".into()));
        }
        let b = &self.binning;
        if !(0.0 < b.low_upper && b.low_upper < b.high_lower && b.high_lower <= 100.0) {
            return Err(Error::InvalidConfig(format!(
                "bin thresholds must satisfy 0 < {} < {} <= 100",
                b.low_upper, b.high_lower
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
