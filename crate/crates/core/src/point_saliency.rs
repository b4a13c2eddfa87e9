//! Per-point image-guided saliency.
//!
//! `s_i = min(1, ‖p_i‖ / d_max) · I_i`, where `I_i` is the image saliency
//! under the point's projection. Per-camera lists are concatenated in camera
//! order; a point seen by two cameras appears twice.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frame::{Frame, Point};
use crate::geometry::project_points;
use crate::saliency::SaliencyMap;

#[derive(Clone, Debug, PartialEq)]
pub struct PointSaliency {
    pub camera_id: Arc<str>,
    pub point_index: usize,
    pub u: f64,
    pub v: f64,
    /// Score in `[0, 1]`.
    pub s: f64,
}

/// Distance-weighted saliency of one point; the distance ratio saturates at 1.
pub fn point_saliency(point: &Point, d_max: f64, intensity: f64) -> Result<f64> {
    if !(d_max > 0.0) {
        return Err(Error::NonPositiveDMax(d_max));
    }
    debug_assert!((0.0..=1.0).contains(&intensity));
    Ok((point.range() / d_max).min(1.0) * intensity)
}

/// Projects the frame's points into camera `camera_index` and samples
/// `saliency` at `(floor(u), floor(v))`.
pub fn camera_point_saliency(
    frame: &Frame,
    camera_index: usize,
    saliency: &SaliencyMap,
    d_max: f64,
) -> Result<Vec<PointSaliency>> {
    if !(d_max > 0.0) {
        return Err(Error::NonPositiveDMax(d_max));
    }
    let calib = &frame.cameras[camera_index].calib;
    if saliency.width() != calib.width || saliency.height() != calib.height {
        return Err(Error::DimensionMismatch {
            camera_id: calib.camera_id.clone(),
            got_w: saliency.width(),
            got_h: saliency.height(),
            want_w: calib.width,
            want_h: calib.height,
        });
    }
    let id: Arc<str> = Arc::from(calib.camera_id.as_str());
    project_points(&frame.points, calib)
        .into_iter()
        .map(|hit| {
            let intensity = saliency.get(hit.u.floor() as u32, hit.v.floor() as u32);
            Ok(PointSaliency {
                camera_id: id.clone(),
                point_index: hit.point_index,
                u: hit.u,
                v: hit.v,
                s: point_saliency(&frame.points[hit.point_index], d_max, intensity)?,
            })
        })
        .collect()
}

/// Concatenates per-camera lists in order, without deduplication.
pub fn aggregate_cameras(per_camera: Vec<Vec<PointSaliency>>) -> Vec<PointSaliency> {
    per_camera.into_iter().flatten().collect()
}
