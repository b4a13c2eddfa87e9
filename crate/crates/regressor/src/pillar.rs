//! Point → pillar statistics on the BEV grid.

use igo_core::Point;
use igo_tensor::{Scalar, Tensor};

use crate::config::ModelConfig;

/// Per-pillar raw statistics, in this order.
pub const RAW_FEATURES: usize = 6;
pub const FEATURE_NAMES: [&str; RAW_FEATURES] = [
    "mean_dx",
    "mean_dy",
    "mean_dz",
    "max_z",
    "log1p_count",
    "mean_intensity",
];

/// Raw pillar statistics for one cloud, cell-major `[H·W, RAW_FEATURES]`.
///
/// Cell `row · W + col` covers `x ∈ [x_min + col·c, x_min + (col+1)·c)` and
/// the same for `y` and `row`. Offsets are taken to the cell center at
/// `z = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PillarFeatures {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub occupied: Vec<bool>,
}

impl PillarFeatures {
    pub fn feature(&self, row: usize, col: usize, k: usize) -> f64 {
        self.values[(row * self.width + col) * RAW_FEATURES + k]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// `[H·W, RAW_FEATURES]`.
    pub fn tensor<T: Scalar>(&self) -> Tensor<T> {
        Tensor::new(
            vec![self.width * self.height, RAW_FEATURES],
            self.values.iter().map(|&v| T::from_f64_lossy(v)).collect(),
        )
        .expect("feature buffer matches grid")
    }

    /// `[H·W, channels]` of ones on occupied cells, zeros elsewhere.
    pub fn mask<T: Scalar>(&self, channels: usize) -> Tensor<T> {
        let data = self
            .occupied
            .iter()
            .flat_map(|&o| std::iter::repeat_n(if o { T::one() } else { T::zero() }, channels))
            .collect();
        Tensor::new(vec![self.width * self.height, channels], data).expect("mask matches grid")
    }
}

/// Grid cell of `p`, or `None` outside the BEV range.
pub fn cell_of(p: &Point, cfg: &ModelConfig) -> Option<(usize, usize)> {
    let (x, y) = (p.x as f64, p.y as f64);
    if x < cfg.x_range[0] || x >= cfg.x_range[1] || y < cfg.y_range[0] || y >= cfg.y_range[1] {
        return None;
    }
    let col = ((x - cfg.x_range[0]) / cfg.cell_size).floor() as usize;
    let row = ((y - cfg.y_range[0]) / cfg.cell_size).floor() as usize;
    (col < cfg.grid_width() && row < cfg.grid_height()).then_some((row, col))
}

/// Bins points into pillars and computes their statistics.
///
/// Points inside each pillar are accumulated in a canonical order, so the
/// result is bit-identical under any permutation of `points`.
pub fn pillar_features(points: &[Point], cfg: &ModelConfig) -> PillarFeatures {
    let (w, h) = (cfg.grid_width(), cfg.grid_height());
    let mut binned: Vec<(usize, Point)> = points
        .iter()
        .filter_map(|p| cell_of(p, cfg).map(|(r, c)| (r * w + c, *p)))
        .collect();
    binned.sort_by(|(ca, a), (cb, b)| {
        ca.cmp(cb)
            .then(a.x.total_cmp(&b.x))
            .then(a.y.total_cmp(&b.y))
            .then(a.z.total_cmp(&b.z))
            .then(a.intensity.total_cmp(&b.intensity))
    });
    let mut values = vec![0.0; w * h * RAW_FEATURES];
    let mut occupied = vec![false; w * h];
    for run in binned.chunk_by(|a, b| a.0 == b.0) {
        let cell = run[0].0;
        let (row, col) = (cell / w, cell % w);
        let cx = cfg.x_range[0] + (col as f64 + 0.5) * cfg.cell_size;
        let cy = cfg.y_range[0] + (row as f64 + 0.5) * cfg.cell_size;
        let n = run.len() as f64;
        let (mut sx, mut sy, mut sz, mut si) = (0.0, 0.0, 0.0, 0.0);
        let mut zmax = f64::NEG_INFINITY;
        for (_, p) in run {
            sx += p.x as f64 - cx;
            sy += p.y as f64 - cy;
            sz += p.z as f64;
            si += p.intensity as f64;
            zmax = zmax.max(p.z as f64);
        }
        let f = &mut values[cell * RAW_FEATURES..(cell + 1) * RAW_FEATURES];
        f.copy_from_slice(&[sx / n, sy / n, sz / n, zmax, n.ln_1p(), si / n]);
        occupied[cell] = true;
    }
    PillarFeatures {
        width: w,
        height: h,
        values,
        occupied,
    }
}
