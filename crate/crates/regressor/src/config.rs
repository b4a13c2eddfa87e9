use serde::{Deserialize, Serialize};

use crate::error::{RegressorError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeKind {
    None,
    Sinusoidal,
    Learned,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backbone {
    Pillar,
    VoxelStub,
}

/// Architecture of the score regressor.
///
/// The BEV grid covers `x_range × y_range` (meters, half-open) with square
/// cells; grid columns run along x and rows along y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub cell_size: f64,
    /// Channels of the pillar encoder and the conv backbone.
    pub pillar_channels: usize,
    pub embed_dim: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub ffn_dim: usize,
    pub patch_size: usize,
    pub positional_encoding: PeKind,
    /// Hidden widths of the per-query score head; a final width-1 layer is appended.
    pub head_widths: Vec<usize>,
    pub backbone: Backbone,
    /// Seed for weight initialization.
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            x_range: [-32.0, 32.0],
            y_range: [-32.0, 32.0],
            cell_size: 1.0,
            pillar_channels: 32,
            embed_dim: 64,
            heads: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            ffn_dim: 128,
            patch_size: 8,
            positional_encoding: PeKind::Sinusoidal,
            head_widths: vec![64],
            backbone: Backbone::Pillar,
            init_seed: 0,
        }
    }
}

fn cells(range: [f64; 2], cell: f64, axis: &str) -> Result<usize> {
    let n = (range[1] - range[0]) / cell;
    let rounded = n.round();
    if !(range[1] > range[0]) || rounded < 1.0 || (n - rounded).abs() > 1e-9 {
        return Err(RegressorError::InvalidConfig(format!(
            "{axis} range {range:?} is not a whole number of {cell} m cells"
        )));
    }
    Ok(rounded as usize)
}

impl ModelConfig {
    /// Grid columns (along x).
    pub fn grid_width(&self) -> usize {
        cells(self.x_range, self.cell_size, "x").unwrap_or(0)
    }

    /// Grid rows (along y).
    pub fn grid_height(&self) -> usize {
        cells(self.y_range, self.cell_size, "y").unwrap_or(0)
    }

    pub fn cell_count(&self) -> usize {
        self.grid_width() * self.grid_height()
    }

    pub fn query_count(&self) -> usize {
        (self.grid_width() / self.patch_size) * (self.grid_height() / self.patch_size)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RegressorError::InvalidConfig(m));
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return bad(format!("cell size {} must be positive", self.cell_size));
        }
        let w = cells(self.x_range, self.cell_size, "x")?;
        let h = cells(self.y_range, self.cell_size, "y")?;
        if self.patch_size == 0 || w % self.patch_size != 0 || h % self.patch_size != 0 {
            return Err(RegressorError::NotDivisible {
                height: h,
                width: w,
                patch: self.patch_size,
            });
        }
        if self.pillar_channels == 0 || self.embed_dim == 0 || self.ffn_dim == 0 {
            return bad("channel, embed and ffn widths must be positive".into());
        }
        if self.heads == 0 || self.embed_dim % self.heads != 0 {
            return bad(format!(
                "embed dim {} is not divisible by {} heads",
                self.embed_dim, self.heads
            ));
        }
        if self.decoder_layers < 1 {
            return bad("at least one decoder layer is required".into());
        }
        if self.head_widths.contains(&0) {
            return bad("head widths must be positive".into());
        }
        if self.positional_encoding == PeKind::Sinusoidal && self.embed_dim % 2 != 0 {
            return Err(RegressorError::OddDim(self.embed_dim));
        }
        Ok(())
    }
}
