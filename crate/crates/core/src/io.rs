//! On-disk codecs: frame descriptors, point binaries and images.
//!
//! A frame lives in one directory:
//!
//! ```text
//! frame.json     descriptor (paths are relative to this file)
//! points.bin     headerless little-endian f32 records (x, y, z, intensity)
//! <camera>.png   one 8-bit gray or RGB image per camera
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Box3D, Camera, CameraCalibration, Frame, ImageSource, Point};

pub const POINT_RECORD_BYTES: usize = 16;
pub const DESCRIPTOR_FILE: &str = "frame.json";
pub const POINTS_FILE: &str = "points.bin";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CameraEntry {
    camera_id: String,
    image_path: String,
    intrinsic: [f64; 9],
    extrinsic: [f64; 16],
    width: u32,
    height: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FrameDescriptor {
    frame_id: String,
    points_path: String,
    cameras: Vec<CameraEntry>,
    boxes: Vec<Box3D>,
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingFile(path.to_path_buf()))
    }
}

pub fn decode_points(bytes: &[u8], path: &Path) -> Result<Vec<Point>> {
    if bytes.len() % POINT_RECORD_BYTES != 0 {
        return Err(Error::MalformedPoints {
            path: path.to_path_buf(),
            reason: format!(
                "{} bytes is not a multiple of the {POINT_RECORD_BYTES}-byte record",
                bytes.len()
            ),
        });
    }
    let f = |b: &[u8]| f32::from_le_bytes(b.try_into().expect("4-byte field"));
    bytes
        .chunks_exact(POINT_RECORD_BYTES)
        .enumerate()
        .map(|(i, r)| {
            let (x, y, z) = (f(&r[0..4]), f(&r[4..8]), f(&r[8..12]));
            if !(x.is_finite() && y.is_finite() && z.is_finite()) {
                return Err(Error::MalformedPoints {
                    path: path.to_path_buf(),
                    reason: format!("record {i} has non-finite coordinates"),
                });
            }
            let raw = f(&r[12..16]);
            let intensity = if raw.is_nan() { 0.0 } else { raw.clamp(0.0, 1.0) };
            Ok(Point::new(x, y, z, intensity))
        })
        .collect()
}

pub fn encode_points(points: &[Point]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * POINT_RECORD_BYTES);
    for p in points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_points(path: &Path) -> Result<Vec<Point>> {
    require(path)?;
    decode_points(&fs::read(path)?, path)
}

/// Decodes a PNG to 8-bit luma, using `0.299 R + 0.587 G + 0.114 B` for color.
pub fn read_gray_png(path: &Path) -> Result<GrayImage> {
    require(path)?;
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(match img {
        DynamicImage::ImageLuma8(g) => g,
        other => rgb_to_luma(&other.to_rgb8()),
    })
}

pub fn rgb_to_luma(rgb: &image::RgbImage) -> GrayImage {
    GrayImage::from_fn(rgb.width(), rgb.height(), |x, y| {
        let [r, g, b] = rgb.get_pixel(x, y).0;
        let l = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
        Luma([l.round().clamp(0.0, 255.0) as u8])
    })
}

pub fn write_gray_png(img: &GrayImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

pub fn write_gray16_png(img: &ImageBuffer<Luma<u16>, Vec<u16>>, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Reads a frame descriptor and every file it references.
///
/// Images are checked for existence here and decoded on first use.
pub fn load_frame(descriptor: impl AsRef<Path>) -> Result<Frame> {
    let descriptor = descriptor.as_ref();
    require(descriptor)?;
    let text = fs::read_to_string(descriptor)?;
    let desc: FrameDescriptor =
        serde_json::from_str(&text).map_err(|e| Error::SchemaMismatch {
            path: descriptor.to_path_buf(),
            reason: e.to_string(),
        })?;
    let root = descriptor.parent().unwrap_or(Path::new("."));
    let points = read_points(&root.join(&desc.points_path))?;
    let mut cameras = Vec::with_capacity(desc.cameras.len());
    for c in desc.cameras {
        let calib = CameraCalibration::new(c.camera_id, c.intrinsic, c.extrinsic, c.width, c.height)?;
        let image_path = root.join(&c.image_path);
        require(&image_path)?;
        cameras.push(Camera {
            calib,
            image: ImageSource::File(image_path),
        });
    }
    let frame = Frame {
        frame_id: desc.frame_id,
        points,
        cameras,
        boxes: desc.boxes,
    };
    frame.validate()?;
    Ok(frame)
}

/// Writes `frame` into `dir` (created if needed) and returns the descriptor path.
pub fn save_frame(frame: &Frame, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    frame.validate()?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(POINTS_FILE), encode_points(&frame.points))?;
    let mut cameras = Vec::with_capacity(frame.cameras.len());
    for cam in &frame.cameras {
        let name = match &cam.image {
            ImageSource::Gray(img) => {
                let name = format!("{}.png", cam.calib.camera_id);
                write_gray_png(img, &dir.join(&name))?;
                name
            }
            ImageSource::File(src) => {
                let name = src
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("{}.png", cam.calib.camera_id));
                let dst = dir.join(&name);
                if fs::canonicalize(src).ok() != fs::canonicalize(&dst).ok() {
                    fs::copy(src, &dst)?;
                }
                name
            }
        };
        let c = &cam.calib;
        cameras.push(CameraEntry {
            camera_id: c.camera_id.clone(),
            image_path: name,
            intrinsic: c.intrinsic,
            extrinsic: c.extrinsic,
            width: c.width,
            height: c.height,
        });
    }
    let desc = FrameDescriptor {
        frame_id: frame.frame_id.clone(),
        points_path: POINTS_FILE.to_owned(),
        cameras,
        boxes: frame.boxes.clone(),
    };
    let path = dir.join(DESCRIPTOR_FILE);
    let mut text = serde_json::to_string_pretty(&desc)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// Every `*/frame.json` directly under `root`, sorted by path.
pub fn discover_frames(root: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(root)? {
        let p = entry?.path().join(DESCRIPTOR_FILE);
        if p.is_file() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Keeps decoded grayscale pixels in memory so repeated scoring passes
/// do not touch the disk.
pub fn decode_images(frame: &mut Frame) -> Result<()> {
    for cam in &mut frame.cameras {
        if let ImageSource::File(_) = cam.image {
            cam.image = ImageSource::Gray(cam.load_gray()?);
        }
    }
    Ok(())
}
