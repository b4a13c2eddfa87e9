//! Object-enhanced image saliency.
//!
//! Fine-grained saliency is a multi-scale center-surround contrast on box
//! means read from an integral image:
//!
//! ```text
//! response(p) = mean_k | mean_{c_k}(p) − mean_{s_k}(p) |
//! ```
//!
//! where `mean_r(p)` averages the `(2r+1)²` window around `p` clipped to the
//! image. The response is then divided by its maximum.

use image::GrayImage;

use crate::config::SaliencyConfig;
use crate::geometry::BBox2D;

/// Dense per-pixel intensity grid in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl SaliencyMap {
    /// Panics when `values` does not hold `width * height` entries in `[0, 1]`.
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width as usize * height as usize, "saliency size");
        assert!(
            values.iter().all(|v| (0.0..=1.0).contains(v)),
            "saliency values must lie in [0, 1]"
        );
        Self {
            width,
            height,
            values,
        }
    }

    pub fn filled(width: u32, height: u32, value: f64) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize])
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

    /// 8-bit rendering, `round(value · 255)`.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            image::Luma([(self.get(x, y) * 255.0).round() as u8])
        })
    }
}

/// Summed-area table with a zero border row/column.
struct Integral {
    w: usize,
    h: usize,
    sums: Vec<u64>,
}

impl Integral {
    fn new(img: &GrayImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let stride = w + 1;
        let mut sums = vec![0u64; stride * (h + 1)];
        let raw = img.as_raw();
        for y in 0..h {
            let mut row = 0u64;
            for x in 0..w {
                row += raw[y * w + x] as u64;
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { w, h, sums }
    }

    /// Mean over the `(2r+1)²` window centered at `(x, y)`, clipped to the image.
    fn box_mean(&self, x: usize, y: usize, r: usize) -> f64 {
        let x0 = x.saturating_sub(r);
        let y0 = y.saturating_sub(r);
        let x1 = (x + r + 1).min(self.w);
        let y1 = (y + r + 1).min(self.h);
        let s = self.w + 1;
        let total = self.sums[y1 * s + x1] + self.sums[y0 * s + x0]
            - self.sums[y0 * s + x1]
            - self.sums[y1 * s + x0];
        total as f64 / ((x1 - x0) * (y1 - y0)) as f64
    }
}

/// Un-normalized multi-scale center-surround response, row-major.
pub fn center_surround_response(img: &GrayImage, cfg: &SaliencyConfig) -> Vec<f64> {
    let ii = Integral::new(img);
    let (w, h) = (ii.w, ii.h);
    let pairs: Vec<(usize, usize)> = cfg
        .center_radii
        .iter()
        .copied()
        .zip(cfg.surround_radii.iter().copied())
        .collect();
    let inv = 1.0 / pairs.len() as f64;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = pairs
                .iter()
                .map(|&(c, s)| (ii.box_mean(x, y, c) - ii.box_mean(x, y, s)).abs())
                .sum();
            out.push(acc * inv);
        }
    }
    out
}

/// Max-normalized center-surround saliency. Constant images map to all zeros.
pub fn fine_grained_saliency(img: &GrayImage, cfg: &SaliencyConfig) -> SaliencyMap {
    let mut values = center_surround_response(img, cfg);
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        values.iter_mut().for_each(|v| *v = (*v / max).min(1.0));
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
    SaliencyMap::new(img.width(), img.height(), values)
}

/// Boosts pixels inside the union of `boxes`: `v' = min(1, v·(1+gain))`.
pub fn enhance_objects(map: &SaliencyMap, boxes: &[BBox2D], gain: f64) -> SaliencyMap {
    assert!(gain >= 0.0, "object gain must be non-negative");
    let mut out = map.clone();
    if boxes.is_empty() || gain == 0.0 {
        return out;
    }
    let w = map.width as usize;
    for y in 0..map.height {
        for x in 0..map.width {
            if boxes.iter().any(|b| b.contains_pixel(x, y)) {
                let v = &mut out.values[y as usize * w + x as usize];
                *v = (*v * (1.0 + gain)).min(1.0);
            }
        }
    }
    out
}
