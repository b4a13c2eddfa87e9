//! Domain types for one synchronized LiDAR + surround-camera sample.

use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::Arc;

use image::GrayImage;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;

/// One LiDAR return in the sensor frame (meters).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    /// Reflectance, clamped to `[0, 1]` on load. Carried but not scored.
    pub intensity: f32,
}

impl Point {
    pub fn new(x: f32, y: f32, z: f32, intensity: f32) -> Self {
        Self { x, y, z, intensity }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x as f64, self.y as f64, self.z as f64)
    }

    /// Euclidean distance to the sensor origin.
    pub fn range(&self) -> f64 {
        self.position().norm()
    }
}

pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Pinhole camera with its LiDAR→camera extrinsic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraCalibration {
    pub camera_id: String,
    /// Row-major 3x3 `K`.
    pub intrinsic: [f64; 9],
    /// Row-major 4x4 rigid transform, LiDAR frame → camera frame.
    pub extrinsic: [f64; 16],
    pub width: u32,
    pub height: u32,
}

impl CameraCalibration {
    /// Builds and validates a calibration.
    pub fn new(
        camera_id: impl Into<String>,
        intrinsic: [f64; 9],
        extrinsic: [f64; 16],
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let calib = Self {
            camera_id: camera_id.into(),
            intrinsic,
            extrinsic,
            width,
            height,
        };
        calib.validate()?;
        Ok(calib)
    }

    /// Convenience constructor from pinhole parameters and a rigid transform.
    pub fn pinhole(
        camera_id: impl Into<String>,
        (fx, fy, cx, cy): (f64, f64, f64, f64),
        lidar_to_camera: &RigidTransform,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        Self::new(
            camera_id,
            [fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0],
            lidar_to_camera.to_row_major(),
            width,
            height,
        )
    }

    pub fn fx(&self) -> f64 {
        self.intrinsic[0]
    }

    pub fn fy(&self) -> f64 {
        self.intrinsic[4]
    }

    pub fn cx(&self) -> f64 {
        self.intrinsic[2]
    }

    pub fn cy(&self) -> f64 {
        self.intrinsic[5]
    }

    pub fn intrinsic_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.intrinsic)
    }

    pub fn lidar_to_camera(&self) -> RigidTransform {
        RigidTransform::from_row_major(&self.extrinsic)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::MalformedCalibration {
            camera_id: self.camera_id.clone(),
            reason,
        };
        if self.intrinsic.iter().chain(&self.extrinsic).any(|v| !v.is_finite()) {
            return Err(bad("non-finite matrix entry".into()));
        }
        if !(self.fx() > 0.0 && self.fy() > 0.0) {
            return Err(bad(format!("focal lengths must be positive (fx={}, fy={})", self.fx(), self.fy())));
        }
        let k = &self.intrinsic;
        if k[3] != 0.0 || k[6] != 0.0 || k[7] != 0.0 || k[8] != 1.0 {
            return Err(bad("intrinsic must be upper triangular with K[2][2] = 1".into()));
        }
        if self.width < 1 || self.height < 1 {
            return Err(bad(format!("image size {}x{}", self.width, self.height)));
        }
        let e = &self.extrinsic;
        if e[12] != 0.0 || e[13] != 0.0 || e[14] != 0.0 || e[15] != 1.0 {
            return Err(bad("extrinsic bottom row must be [0, 0, 0, 1]".into()));
        }
        let r = self.lidar_to_camera().rotation;
        let ortho = (r * r.transpose() - Matrix3::identity()).abs().max();
        if ortho > ROTATION_TOLERANCE {
            return Err(bad(format!("rotation not orthonormal (|R·Rᵀ − I|max = {ortho:.3e})")));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(bad(format!("rotation determinant {det}")));
        }
        Ok(())
    }
}

/// Annotated 3D box in the LiDAR frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center: [f64; 3],
    /// `(w, l, h)`: width along the box's local y, length along its heading, height along z.
    pub size: [f64; 3],
    /// Heading around LiDAR z, radians in `[-π, π]`.
    pub yaw: f64,
    pub class_label: String,
}

impl Box3D {
    pub fn validate(&self) -> Result<()> {
        if self.center.iter().chain(&self.size).any(|v| !v.is_finite()) || !self.yaw.is_finite() {
            return Err(Error::MalformedAnnotation("non-finite box field".into()));
        }
        if self.size.iter().any(|&s| s <= 0.0) {
            return Err(Error::MalformedAnnotation(format!(
                "box sizes must be positive, got {:?}",
                self.size
            )));
        }
        if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&self.yaw) {
            return Err(Error::MalformedAnnotation(format!("yaw {} outside [-π, π]", self.yaw)));
        }
        Ok(())
    }

    /// The eight corners, LiDAR frame.
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let [w, l, h] = self.size;
        let (s, c) = self.yaw.sin_cos();
        let center = Vector3::from(self.center);
        let mut out = [Vector3::zeros(); 8];
        let mut i = 0;
        for sx in [-0.5, 0.5] {
            for sy in [-0.5, 0.5] {
                for sz in [-0.5, 0.5] {
                    let (lx, ly, lz) = (sx * l, sy * w, sz * h);
                    out[i] = center + Vector3::new(c * lx - s * ly, s * lx + c * ly, lz);
                    i += 1;
                }
            }
        }
        out
    }
}

/// Where a camera's pixels come from.
#[derive(Clone, Debug)]
pub enum ImageSource {
    /// PNG on disk (8-bit gray or RGB).
    File(PathBuf),
    /// Already decoded grayscale pixels.
    Gray(Arc<GrayImage>),
}

#[derive(Clone, Debug)]
pub struct Camera {
    pub calib: CameraCalibration,
    pub image: ImageSource,
}

impl Camera {
    /// Grayscale pixels (luma for RGB sources).
    pub fn load_gray(&self) -> Result<Arc<GrayImage>> {
        let img = match &self.image {
            ImageSource::Gray(img) => img.clone(),
            ImageSource::File(path) => Arc::new(crate::io::read_gray_png(path)?),
        };
        if img.width() != self.calib.width || img.height() != self.calib.height {
            return Err(Error::DimensionMismatch {
                camera_id: self.calib.camera_id.clone(),
                got_w: img.width(),
                got_h: img.height(),
                want_w: self.calib.width,
                want_h: self.calib.height,
            });
        }
        Ok(img)
    }
}

#[derive(Clone, Debug)]
pub struct Frame {
    pub frame_id: String,
    pub points: Vec<Point>,
    pub cameras: Vec<Camera>,
    pub boxes: Vec<Box3D>,
}

impl Frame {
    pub fn validate(&self) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(Error::InvalidFrame(format!("frame {} has no cameras", self.frame_id)));
        }
        let mut ids = HashSet::new();
        for cam in &self.cameras {
            cam.calib.validate()?;
            if !ids.insert(cam.calib.camera_id.as_str()) {
                return Err(Error::InvalidFrame(format!(
                    "duplicate camera id {} in frame {}",
                    cam.calib.camera_id, self.frame_id
                )));
            }
        }
        for b in &self.boxes {
            b.validate()?;
        }
        if let Some(p) = self
            .points
            .iter()
            .find(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::InvalidFrame(format!("non-finite point {p:?}")));
        }
        Ok(())
    }

    /// Largest point range in this frame (0 when empty).
    pub fn max_range(&self) -> f64 {
        self.points.iter().map(Point::range).fold(0.0, f64::max)
    }
}
