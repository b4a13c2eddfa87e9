//! Gaussian saliency pooling.
//!
//! Each point saliency is scattered onto a per-camera canvas as a truncated,
//! unnormalized Gaussian disc (peak value `s`). A camera's raw score is the
//! sum of its canvas; a frame's raw score is the sum over its cameras.

use image::{ImageBuffer, Luma};

use crate::config::PoolingConfig;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::point_saliency::{camera_point_saliency, PointSaliency};
use crate::saliency::SaliencyMap;

/// Non-negative accumulation grid, row-major, 64-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledCanvas {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl PooledCanvas {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width as usize * height as usize],
        }
    }

    /// Canvas for a camera image of the given size at downsample factor `k`.
    pub fn for_camera(width: u32, height: u32, k: u32) -> Self {
        Self::new(width.div_ceil(k), height.div_ceil(k))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// Adds `s · exp(−d²/(2σ²))` to every cell whose integer coordinates lie
    /// within `radius` of `(u, v)`. All arguments are in canvas units.
    pub fn splat(&mut self, u: f64, v: f64, s: f64, sigma: f64, radius: f64) {
        debug_assert!(sigma > 0.0 && radius > 0.0);
        if s == 0.0 || self.values.is_empty() {
            return;
        }
        let r2 = radius * radius;
        let inv = 1.0 / (2.0 * sigma * sigma);
        let y0 = (v - radius).ceil().max(0.0) as i64;
        let y1 = (v + radius).floor().min(self.height as f64 - 1.0) as i64;
        let x0 = (u - radius).ceil().max(0.0) as i64;
        let x1 = (u + radius).floor().min(self.width as f64 - 1.0) as i64;
        let w = self.width as usize;
        for y in y0..=y1 {
            let dy = y as f64 - v;
            for x in x0..=x1 {
                let dx = x as f64 - u;
                let d2 = dx * dx + dy * dy;
                if d2 <= r2 {
                    self.values[y as usize * w + x as usize] += s * (-d2 * inv).exp();
                }
            }
        }
    }

    /// Row-major sum of all cells.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// 16-bit rendering, `value / max · 65535`.
    pub fn to_gray16(&self) -> ImageBuffer<Luma<u16>, Vec<u16>> {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        ImageBuffer::from_fn(self.width, self.height, |x, y| {
            let v = if max > 0.0 { self.get(x, y) / max } else { 0.0 };
            Luma([(v * 65535.0).round() as u16])
        })
    }
}

/// Splats one camera's point saliencies onto a fresh canvas.
///
/// Splats are applied in `(u, v, s)` order so that floating-point
/// accumulation, and hence the canvas, does not depend on input order.
pub fn camera_canvas(points: &[PointSaliency], width: u32, height: u32, cfg: &PoolingConfig) -> PooledCanvas {
    let k = cfg.downsample as f64;
    let mut canvas = PooledCanvas::for_camera(width, height, cfg.downsample);
    let mut order: Vec<&PointSaliency> = points.iter().collect();
    order.sort_by(|a, b| {
        a.u.total_cmp(&b.u)
            .then(a.v.total_cmp(&b.v))
            .then(a.s.total_cmp(&b.s))
    });
    for p in order {
        canvas.splat(p.u / k, p.v / k, p.s, cfg.sigma / k, cfg.radius / k);
    }
    canvas
}

pub fn camera_raw_score(points: &[PointSaliency], width: u32, height: u32, cfg: &PoolingConfig) -> f64 {
    camera_canvas(points, width, height, cfg).total()
}

/// Sum of the per-camera raw scores, in camera order.
pub fn frame_raw_score(frame: &Frame, maps: &[SaliencyMap], d_max: f64, cfg: &PoolingConfig) -> Result<f64> {
    if maps.len() != frame.cameras.len() {
        return Err(Error::InvalidFrame(format!(
            "{} saliency maps for {} cameras",
            maps.len(),
            frame.cameras.len()
        )));
    }
    let mut total = 0.0;
    for (i, (cam, map)) in frame.cameras.iter().zip(maps).enumerate() {
        let pts = camera_point_saliency(frame, i, map, d_max)?;
        total += camera_raw_score(&pts, cam.calib.width, cam.calib.height, cfg);
    }
    Ok(total)
}
