//! Image-guided point-cloud quality scoring.
//!
//! A frame's LiDAR points are projected into each camera, weighted by a
//! center-surround saliency map of that camera's image (boosted inside
//! projected object boxes) and by their normalized range, then splatted
//! onto a Gaussian canvas. The canvas sum across cameras is the frame's raw
//! score; a dataset manifest maps raw scores onto `[0, 100]` and three bins.
//!
//! ```
//! use igo_core::{fit_dataset, generate_scene, ScoringConfig, SceneSpec};
//!
//! let frames: Vec<_> = [1.0, 0.3]
//!     .iter()
//!     .enumerate()
//!     .map(|(i, &density)| {
//!         let spec = SceneSpec { seed: i as u64, density, n_cameras: 2,
//!                                image_width: 64, image_height: 36, ..SceneSpec::default() };
//!         generate_scene(&spec).unwrap()
//!     })
//!     .collect();
//! let fitted = fit_dataset(&frames, &ScoringConfig::default()).unwrap();
//! let records = fitted.records(&frames, &ScoringConfig::default().binning);
//! assert!(records.iter().all(|r| (0.0..=100.0).contains(&r.igo_pqa)));
//! ```

pub mod config;
pub mod error;
pub mod frame;
pub mod geometry;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod point_saliency;
pub mod pooling;
pub mod saliency;
pub mod scoring;
pub mod synth;

pub use config::{BinningConfig, PoolingConfig, SaliencyConfig, ScoringConfig};
pub use error::{Error, Result};
pub use frame::{Box3D, Camera, CameraCalibration, Frame, ImageSource, Point};
pub use geometry::{project_box, project_points, BBox2D, PixelHit, RigidTransform};
pub use io::{discover_frames, load_frame, save_frame};
pub use manifest::{load_manifest, save_manifest, DatasetManifest};
pub use metrics::{mean_l1, plcc, srcc, MetricReport};
pub use point_saliency::PointSaliency;
pub use saliency::{enhance_objects, fine_grained_saliency, SaliencyMap};
pub use scoring::{bin_score, fit_dataset, normalize_score, score_frame_raw, FittedDataset, QualityBin, QualityRecord};
pub use synth::{generate_dataset, generate_scene, SceneRanges, SceneSpec, SyntheticFrame};
