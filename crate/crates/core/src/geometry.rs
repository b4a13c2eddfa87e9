//! Rigid transforms and pinhole projection.

use nalgebra::{Matrix3, Vector3};

use crate::frame::{Box3D, CameraCalibration, Point};

/// Points at or closer than this camera-frame depth are never projected.
pub const DEPTH_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Reads the upper 3x4 block of a row-major 4x4 matrix.
    pub fn from_row_major(m: &[f64; 16]) -> Self {
        Self {
            rotation: Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]),
            translation: Vector3::new(m[3], m[7], m[11]),
        }
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Inverse of a rigid transform: `(Rᵀ, −Rᵀt)`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// A point that landed inside a camera image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelHit {
    pub point_index: usize,
    pub u: f64,
    pub v: f64,
    /// Camera-frame z, meters.
    pub depth: f64,
}

/// Axis-aligned image rectangle `[u_min, u_max] x [v_min, v_max]` in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox2D {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BBox2D {
    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.u_min + self.u_max),
            0.5 * (self.v_min + self.v_max),
        )
    }

    /// Pixel `(x, y)` belongs to the box when its center lies inside.
    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        px >= self.u_min && px <= self.u_max && py >= self.v_min && py <= self.v_max
    }
}

/// Camera-frame point → continuous pixel coordinates, if in front of the camera.
fn to_pixel(k: &Matrix3<f64>, pc: &Vector3<f64>) -> Option<(f64, f64, f64)> {
    if pc.z <= DEPTH_EPSILON {
        return None;
    }
    let h = k * pc;
    Some((h.x / h.z, h.y / h.z, pc.z))
}

/// Projects every point and keeps those in front of the camera and inside
/// the image. Output is ordered by `point_index`.
pub fn project_points(points: &[Point], calib: &CameraCalibration) -> Vec<PixelHit> {
    let k = calib.intrinsic_matrix();
    let t = calib.lidar_to_camera();
    let (w, h) = (calib.width as f64, calib.height as f64);
    points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let (u, v, depth) = to_pixel(&k, &t.apply(&p.position()))?;
            (u >= 0.0 && u < w && v >= 0.0 && v < h).then_some(PixelHit {
                point_index: i,
                u,
                v,
                depth,
            })
        })
        .collect()
}

/// Axis-aligned hull of the box's in-front corners, clipped to the image.
///
/// `None` when every corner is behind the camera or the hull misses the
/// image entirely.
pub fn project_box(b: &Box3D, calib: &CameraCalibration) -> Option<BBox2D> {
    let k = calib.intrinsic_matrix();
    let t = calib.lidar_to_camera();
    let mut hull: Option<BBox2D> = None;
    for corner in b.corners() {
        let Some((u, v, _)) = to_pixel(&k, &t.apply(&corner)) else {
            continue;
        };
        hull = Some(match hull {
            None => BBox2D {
                u_min: u,
                v_min: v,
                u_max: u,
                v_max: v,
            },
            Some(bb) => BBox2D {
                u_min: bb.u_min.min(u),
                v_min: bb.v_min.min(v),
                u_max: bb.u_max.max(u),
                v_max: bb.v_max.max(v),
            },
        });
    }
    let bb = hull?;
    let (w, h) = (calib.width as f64, calib.height as f64);
    let clipped = BBox2D {
        u_min: bb.u_min.clamp(0.0, w),
        v_min: bb.v_min.clamp(0.0, h),
        u_max: bb.u_max.clamp(0.0, w),
        v_max: bb.v_max.clamp(0.0, h),
    };
    let empty = bb.u_max < 0.0 || bb.u_min > w || bb.v_max < 0.0 || bb.v_min > h;
    (!empty).then_some(clipped)
}
