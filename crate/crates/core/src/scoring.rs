//! Dataset fitting, 0–100 normalization and quality bins.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BinningConfig, SaliencyConfig, ScoringConfig};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geometry::project_box;
use crate::manifest::DatasetManifest;
use crate::pooling::frame_raw_score;
use crate::saliency::{enhance_objects, fine_grained_saliency, SaliencyMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QualityBin {
    Low,
    Medium,
    High,
}

impl QualityBin {
    pub const ALL: [QualityBin; 3] = [QualityBin::Low, QualityBin::Medium, QualityBin::High];

    pub fn as_str(self) -> &'static str {
        match self {
            QualityBin::Low => "low",
            QualityBin::Medium => "medium",
            QualityBin::High => "high",
        }
    }
}

impl fmt::Display for QualityBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QualityBin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(QualityBin::Low),
            "medium" => Ok(QualityBin::Medium),
            "high" => Ok(QualityBin::High),
            other => Err(Error::InvalidConfig(format!("unknown quality bin {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityRecord {
    pub frame_id: String,
    pub raw_score: f64,
    pub igo_pqa: f64,
    pub bin: QualityBin,
}

/// Object-enhanced saliency map for every camera of `frame`, in camera order.
pub fn frame_saliency_maps(frame: &Frame, cfg: &SaliencyConfig) -> Result<Vec<SaliencyMap>> {
    frame
        .cameras
        .iter()
        .map(|cam| {
            let gray = cam.load_gray()?;
            let base = fine_grained_saliency(&gray, cfg);
            let boxes: Vec<_> = frame
                .boxes
                .iter()
                .filter_map(|b| project_box(b, &cam.calib))
                .collect();
            Ok(enhance_objects(&base, &boxes, cfg.object_gain))
        })
        .collect()
}

/// Raw (pre-normalization) score of one frame.
pub fn score_frame_raw(frame: &Frame, cfg: &ScoringConfig, d_max: f64) -> Result<f64> {
    let maps = frame_saliency_maps(frame, &cfg.saliency)?;
    frame_raw_score(frame, &maps, d_max, &cfg.pooling)
}

/// Affine map of `raw` onto `[0, 100]` using the fitted range, clamped.
pub fn normalize_score(raw: f64, manifest: &DatasetManifest) -> f64 {
    let span = manifest.raw_max() - manifest.raw_min();
    if span <= 0.0 {
        return if raw >= manifest.raw_max() { 100.0 } else { 0.0 };
    }
    (100.0 * (raw - manifest.raw_min()) / span).clamp(0.0, 100.0)
}

pub fn bin_score(igo_pqa: f64, cfg: &BinningConfig) -> QualityBin {
    if igo_pqa < cfg.low_upper {
        QualityBin::Low
    } else if igo_pqa < cfg.high_lower {
        QualityBin::Medium
    } else {
        QualityBin::High
    }
}

/// Result of the two fitting passes.
#[derive(Clone, Debug)]
pub struct FittedDataset {
    pub manifest: DatasetManifest,
    /// Raw scores in input order.
    pub raw_scores: Vec<f64>,
}

/// Pass 1: `d_max` over every point of every frame. Pass 2: raw scores with
/// that `d_max`, whose extremes become the normalization range.
pub fn fit_dataset(frames: &[Frame], cfg: &ScoringConfig) -> Result<FittedDataset> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d_max = frames
        .par_iter()
        .map(Frame::max_range)
        .reduce(|| 0.0, f64::max);
    if !(d_max > 0.0) {
        return Err(Error::NonPositiveDMax(d_max));
    }
    let raw_scores: Vec<f64> = frames
        .par_iter()
        .map(|f| score_frame_raw(f, cfg, d_max))
        .collect::<Result<_>>()?;
    let raw_min = raw_scores.iter().copied().fold(f64::INFINITY, f64::min);
    let raw_max = raw_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if raw_max == raw_min {
        return Err(Error::DegenerateRange(raw_min));
    }
    let manifest = DatasetManifest::new(d_max, raw_min, raw_max, frames.len(), cfg.hash())?;
    Ok(FittedDataset {
        manifest,
        raw_scores,
    })
}

pub fn make_record(frame_id: &str, raw: f64, manifest: &DatasetManifest, cfg: &BinningConfig) -> QualityRecord {
    let igo_pqa = normalize_score(raw, manifest);
    QualityRecord {
        frame_id: frame_id.to_owned(),
        raw_score: raw,
        igo_pqa,
        bin: bin_score(igo_pqa, cfg),
    }
}

impl FittedDataset {
    pub fn records(&self, frames: &[Frame], cfg: &BinningConfig) -> Vec<QualityRecord> {
        frames
            .iter()
            .zip(&self.raw_scores)
            .map(|(f, &raw)| make_record(&f.frame_id, raw, &self.manifest, cfg))
            .collect()
    }
}

/// Scores frames against a frozen manifest (held-out data).
pub fn score_with_manifest(
    frames: &[Frame],
    manifest: &DatasetManifest,
    cfg: &ScoringConfig,
) -> Result<Vec<QualityRecord>> {
    cfg.validate()?;
    frames
        .par_iter()
        .map(|f| {
            let raw = score_frame_raw(f, cfg, manifest.d_max())?;
            Ok(make_record(&f.frame_id, raw, manifest, &cfg.binning))
        })
        .collect()
}

pub fn write_scores_csv(records: &[QualityRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["frame_id", "raw_score", "igo_pqa", "bin"]).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.frame_id.clone(),
            r.raw_score.to_string(),
            r.igo_pqa.to_string(),
            r.bin.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<Vec<QualityRecord>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let schema = |reason: String| Error::SchemaMismatch {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| schema(format!("missing column {name}")))
    };
    let (ci, cr, cs, cb) = (col("frame_id")?, col("raw_score")?, col("igo_pqa")?, col("bin")?);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| schema(format!("row {}: bad number in column {c}", line + 1)))
        };
        out.push(QualityRecord {
            frame_id: rec.get(ci).unwrap_or_default().to_owned(),
            raw_score: num(cr)?,
            igo_pqa: num(cs)?,
            bin: rec.get(cb).unwrap_or_default().parse()?,
        });
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidConfig(format!("csv: {other:?}")),
    }
}
