use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("malformed calibration for camera {camera_id}: {reason}")]
    MalformedCalibration { camera_id: String, reason: String },

    #[error("malformed points file {path}: {reason}")]
    MalformedPoints { path: PathBuf, reason: String },

    #[error("malformed annotation: {0}")]
    MalformedAnnotation(String),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("schema mismatch in {path}: {reason}")]
    SchemaMismatch { path: PathBuf, reason: String },

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("d_max must be positive, got {0}")]
    NonPositiveDMax(f64),

    #[error("saliency map is {got_w}x{got_h} but camera {camera_id} is {want_w}x{want_h}")]
    DimensionMismatch {
        camera_id: String,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },

    #[error("raw scores are degenerate (min == max == {0})")]
    DegenerateRange(f64),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("zero variance input")]
    ZeroVariance,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
