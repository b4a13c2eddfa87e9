//! Seeded synthetic frames: a ground disc, box-shaped objects, a ring of
//! pinhole cameras and flat-shaded images where objects show up as bright
//! rectangles.
//!
//! Every random quantity comes from its own ChaCha stream keyed by the scene
//! seed. Ground and object-surface points are drawn sequentially, so a scene
//! with a higher density contains the sparser scene's points as a prefix of
//! each stream.

use std::f64::consts::PI;
use std::sync::Arc;

use image::{GrayImage, Luma};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Box3D, Camera, CameraCalibration, Frame, ImageSource, Point};
use crate::geometry::{project_box, RigidTransform};

/// LiDAR mounting height above the ground plane, meters.
pub const SENSOR_HEIGHT: f64 = 1.8;
pub const MIN_GROUND_RADIUS: f64 = 2.0;
pub const CAMERA_HFOV_DEG: f64 = 70.0;
/// Object surfaces are sampled this many times denser than the ground.
pub const OBJECT_DENSITY_FACTOR: f64 = 4.0;
const BACKGROUND_GRAY: f64 = 90.0;
const OBJECT_GRAY: f64 = 210.0;

const STREAM_LAYOUT: u64 = 1;
const STREAM_GROUND: u64 = 2;
const STREAM_OBJECTS: u64 = 1_000;
const STREAM_NOISE: u64 = 2_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub n_cameras: usize,
    /// Ground points per square meter.
    pub density: f64,
    /// Farthest allowed point range, meters.
    pub max_range: f64,
    pub n_objects: usize,
    pub image_width: u32,
    pub image_height: u32,
    /// Standard deviation of the image noise, gray levels.
    pub noise: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_cameras: 6,
            density: 1.0,
            max_range: 30.0,
            n_objects: 4,
            image_width: 192,
            image_height: 108,
            noise: 3.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::InvalidConfig(format!("density {} must be positive", self.density)));
        }
        if !(self.max_range > MIN_GROUND_RADIUS + 1.0 && self.max_range.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "max range {} must exceed {} m",
                self.max_range,
                MIN_GROUND_RADIUS + 1.0
            )));
        }
        if self.n_cameras < 1 {
            return Err(Error::InvalidConfig("need at least one camera".into()));
        }
        if self.image_width < 1 || self.image_height < 1 {
            return Err(Error::InvalidConfig("image dims must be positive".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::InvalidConfig("noise must be non-negative".into()));
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Evenly spaced ring of cameras looking outward, camera-frame axes
/// (right, down, forward).
pub fn camera_ring(n: usize, width: u32, height: u32) -> Vec<CameraCalibration> {
    let f = (width as f64 / 2.0) / (CAMERA_HFOV_DEG.to_radians() / 2.0).tan();
    (0..n)
        .map(|k| {
            let yaw = 2.0 * PI * k as f64 / n as f64;
            let (s, c) = yaw.sin_cos();
            let rotation = Matrix3::new(s, -c, 0.0, 0.0, 0.0, -1.0, c, s, 0.0);
            let center = Vector3::new(0.3 * c, 0.3 * s, 0.2);
            let t = RigidTransform::new(rotation, -(rotation * center));
            CameraCalibration::pinhole(
                format!("cam{k}"),
                (f, f, width as f64 / 2.0, height as f64 / 2.0),
                &t,
                width,
                height,
            )
            .expect("ring calibration is valid")
        })
        .collect()
}

fn sample_boxes(spec: &SceneSpec) -> Vec<Box3D> {
    let mut rng = stream(spec.seed, STREAM_LAYOUT);
    let far = (spec.max_range - 3.0).max(MIN_GROUND_RADIUS + 1.0);
    let near = 6.0f64.min(far);
    (0..spec.n_objects)
        .map(|_| {
            let r = rng.random_range(near..=far);
            let theta = rng.random_range(-PI..PI);
            let w = rng.random_range(1.6..2.2);
            let l = rng.random_range(3.8..5.0);
            let h = rng.random_range(1.4..1.9);
            Box3D {
                center: [r * theta.cos(), r * theta.sin(), -SENSOR_HEIGHT + h / 2.0],
                size: [w, l, h],
                yaw: rng.random_range(-PI..PI),
                class_label: "car".into(),
            }
        })
        .collect()
}

fn ground_points(spec: &SceneSpec) -> Vec<Point> {
    let mut rng = stream(spec.seed, STREAM_GROUND);
    let outer = (spec.max_range * spec.max_range - SENSOR_HEIGHT * SENSOR_HEIGHT).sqrt();
    let (r0, r1) = (MIN_GROUND_RADIUS * MIN_GROUND_RADIUS, outer * outer);
    let n = (spec.density * PI * (r1 - r0)).round() as usize;
    (0..n)
        .map(|_| {
            let rho = (r0 + rng.random::<f64>() * (r1 - r0)).sqrt();
            let theta = rng.random_range(-PI..PI);
            Point::new(
                (rho * theta.cos()) as f32,
                (rho * theta.sin()) as f32,
                -SENSOR_HEIGHT as f32,
                rng.random_range(0.05..0.3),
            )
        })
        .collect()
}

/// Points on the four sides and the top of `b`, area-weighted.
fn object_points(spec: &SceneSpec, b: &Box3D, index: usize) -> Vec<Point> {
    let mut rng = stream(spec.seed, STREAM_OBJECTS + index as u64);
    let [w, l, h] = b.size;
    // faces: ±x (w·h), ±y (l·h), top (w·l)
    let areas = [w * h, w * h, l * h, l * h, w * l];
    let total: f64 = areas.iter().sum();
    let n = (spec.density * OBJECT_DENSITY_FACTOR * total).round() as usize;
    let (s, c) = b.yaw.sin_cos();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = rng.random::<f64>() * total;
        let mut face = 0;
        while face < 4 && pick >= areas[face] {
            pick -= areas[face];
            face += 1;
        }
        let (a, bb) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let (lx, ly, lz) = match face {
            0 => (0.5 * l, a * w, bb * h),
            1 => (-0.5 * l, a * w, bb * h),
            2 => (a * l, 0.5 * w, bb * h),
            3 => (a * l, -0.5 * w, bb * h),
            _ => (a * l, bb * w, 0.5 * h),
        };
        let x = b.center[0] + c * lx - s * ly;
        let y = b.center[1] + s * lx + c * ly;
        let z = b.center[2] + lz;
        let p = Point::new(x as f32, y as f32, z as f32, rng.random_range(0.3..0.9));
        if p.range() <= spec.max_range {
            out.push(p);
        }
    }
    out
}

fn render(spec: &SceneSpec, calib: &CameraCalibration, boxes: &[Box3D], cam_index: usize) -> GrayImage {
    let mut rng = stream(spec.seed, STREAM_NOISE + cam_index as u64);
    let rects: Vec<_> = boxes.iter().filter_map(|b| project_box(b, calib)).collect();
    let normal = (spec.noise > 0.0).then(|| Normal::new(0.0, spec.noise).expect("noise std"));
    GrayImage::from_fn(calib.width, calib.height, |x, y| {
        let base = if rects.iter().any(|r| r.contains_pixel(x, y)) {
            OBJECT_GRAY
        } else {
            BACKGROUND_GRAY
        };
        let n = normal.as_ref().map_or(0.0, |d| d.sample(&mut rng));
        Luma([(base + n).round().clamp(0.0, 255.0) as u8])
    })
}

/// Builds one frame, fully determined by `spec`.
pub fn generate_scene(spec: &SceneSpec) -> Result<Frame> {
    spec.validate()?;
    let boxes = sample_boxes(spec);
    let mut points = ground_points(spec);
    for (i, b) in boxes.iter().enumerate() {
        points.extend(object_points(spec, b, i));
    }
    let cameras = camera_ring(spec.n_cameras, spec.image_width, spec.image_height)
        .into_iter()
        .enumerate()
        .map(|(i, calib)| {
            let img = render(spec, &calib, &boxes, i);
            Camera {
                calib,
                image: ImageSource::Gray(Arc::new(img)),
            }
        })
        .collect();
    Ok(Frame {
        frame_id: format!("scene_{:016x}", spec.seed),
        points,
        cameras,
        boxes,
    })
}

/// Sampling ranges for [`generate_dataset`]; bounds are inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneRanges {
    pub density: (f64, f64),
    pub max_range: (f64, f64),
    pub n_objects: (usize, usize),
    pub n_cameras: usize,
    pub image_width: u32,
    pub image_height: u32,
    pub noise: f64,
}

impl Default for SceneRanges {
    fn default() -> Self {
        Self {
            density: (0.1, 1.0),
            max_range: (12.0, 30.0),
            n_objects: (2, 6),
            n_cameras: 6,
            image_width: 192,
            image_height: 108,
            noise: 3.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticFrame {
    pub spec: SceneSpec,
    pub frame: Frame,
}

/// Per-frame specs drawn from `ranges`; per-frame seeds derive from `seed`.
pub fn sample_specs(n_frames: usize, ranges: &SceneRanges, seed: u64) -> Vec<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_frames)
        .map(|_| SceneSpec {
            seed: rng.next_u64(),
            n_cameras: ranges.n_cameras,
            density: rng.random_range(ranges.density.0..=ranges.density.1),
            max_range: rng.random_range(ranges.max_range.0..=ranges.max_range.1),
            n_objects: rng.random_range(ranges.n_objects.0..=ranges.n_objects.1),
            image_width: ranges.image_width,
            image_height: ranges.image_height,
            noise: ranges.noise,
        })
        .collect()
}

pub fn generate_dataset(n_frames: usize, ranges: &SceneRanges, seed: u64) -> Result<Vec<SyntheticFrame>> {
    if n_frames < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 frames, got {n_frames}")));
    }
    sample_specs(n_frames, ranges, seed)
        .into_par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let mut frame = generate_scene(&spec)?;
            frame.frame_id = format!("frame_{i:04}");
            Ok(SyntheticFrame { spec, frame })
        })
        .collect()
}
