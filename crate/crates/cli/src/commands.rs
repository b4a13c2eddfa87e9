use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use igo_core::io::{decode_images, write_gray16_png, write_gray_png};
use igo_core::point_saliency::camera_point_saliency;
use igo_core::pooling::camera_canvas;
use igo_core::scoring::{frame_saliency_maps, read_scores_csv, score_with_manifest, write_scores_csv};
use igo_core::{
    bin_score, discover_frames, fit_dataset, generate_dataset, load_frame, load_manifest, save_frame, save_manifest,
    Error as CoreError, Frame, QualityBin, QualityRecord,
};
use igo_regressor::{evaluate, load_checkpoint, prepare, save_checkpoint, train as fit_model, Model};
use rayon::prelude::*;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::report::{bin_counts, check_scores, histogram};
use crate::{BinArgs, EvalArgs, GenerateArgs, ReportArgs, SynthArgs, TrainArgs};

type Out<'a> = &'a mut (dyn Write + Send);

/// Every frame under `dir`, images decoded.
pub fn load_frames(dir: &Path) -> Result<Vec<Frame>> {
    let paths = discover_frames(dir)?;
    if paths.is_empty() {
        return Err(CoreError::EmptyDataset.into());
    }
    let frames = paths
        .par_iter()
        .map(|p| {
            let mut f = load_frame(p)?;
            decode_images(&mut f)?;
            Ok(f)
        })
        .collect::<igo_core::Result<Vec<_>>>()?;
    Ok(frames)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn synth(cfg: &PipelineConfig, a: &SynthArgs, out: Out) -> Result<()> {
    let set = generate_dataset(a.n, &cfg.synth, a.seed)?;
    fs::create_dir_all(&a.out)?;
    set.par_iter()
        .map(|s| save_frame(&s.frame, a.out.join(&s.frame.frame_id)).map(|_| ()))
        .collect::<igo_core::Result<()>>()?;
    let specs: Vec<_> = set
        .iter()
        .map(|s| json!({"frame_id": s.frame.frame_id, "spec": s.spec}))
        .collect();
    write_json(&a.out.join("specs.json"), &json!(specs))?;
    writeln!(out, "wrote {} frames to {}", set.len(), a.out.display())?;
    Ok(())
}

pub fn generate(cfg: &PipelineConfig, a: &GenerateArgs, out: Out) -> Result<()> {
    let frames = load_frames(&a.data)?;
    let scoring = cfg.scoring();
    let (records, manifest) = match &a.manifest {
        Some(path) => {
            let m = load_manifest(path)?;
            if m.pipeline_config_hash() != cfg.config_hash() {
                return Err(CoreError::InvalidManifest(format!(
                    "{} was fitted with config {} but the current config hashes to {}",
                    path.display(),
                    m.pipeline_config_hash(),
                    cfg.config_hash()
                ))
                .into());
            }
            (score_with_manifest(&frames, &m, &scoring)?, m)
        }
        None => {
            let fitted = fit_dataset(&frames, &scoring)?;
            (fitted.records(&frames, &scoring.binning), fitted.manifest)
        }
    };
    fs::create_dir_all(&a.out)?;
    write_scores_csv(&records, a.out.join("scores.csv"))?;
    save_manifest(&manifest, a.out.join("manifest.json"))?;

    if a.dump_point_saliency || a.dump_canvas {
        let (ps_dir, canvas_dir) = (a.out.join("point_saliency"), a.out.join("canvas"));
        if a.dump_point_saliency {
            fs::create_dir_all(&ps_dir)?;
        }
        if a.dump_canvas {
            fs::create_dir_all(&canvas_dir)?;
        }
        frames
            .par_iter()
            .map(|frame| -> Result<()> {
                let maps = frame_saliency_maps(frame, &scoring.saliency)?;
                let mut csv = String::from("camera_id,u,v,s\n");
                for (i, cam) in frame.cameras.iter().enumerate() {
                    let pts = camera_point_saliency(frame, i, &maps[i], manifest.d_max())?;
                    for p in &pts {
                        let _ = writeln!(csv, "{},{},{},{}", p.camera_id, p.u, p.v, p.s);
                    }
                    if a.dump_canvas {
                        let c = camera_canvas(&pts, cam.calib.width, cam.calib.height, &scoring.pooling);
                        let name = format!("{}_{}.png", frame.frame_id, cam.calib.camera_id);
                        write_gray16_png(&c.to_gray16(), &canvas_dir.join(name))?;
                    }
                }
                if a.dump_point_saliency {
                    write_text(&ps_dir.join(format!("{}.csv", frame.frame_id)), &csv)?;
                }
                Ok(())
            })
            .collect::<Result<()>>()?;
    }

    let scores: Vec<f64> = records.iter().map(|r| r.igo_pqa).collect();
    let counts = bin_counts(&scores, &cfg.binning)?;
    writeln!(
        out,
        "scored {} frames  d_max {:.3}  raw [{:.6}, {:.6}]  low {}  medium {}  high {}",
        records.len(),
        manifest.d_max(),
        manifest.raw_min(),
        manifest.raw_max(),
        counts.low,
        counts.medium,
        counts.high
    )?;
    Ok(())
}

pub fn bin(cfg: &PipelineConfig, a: &BinArgs, out: Out) -> Result<()> {
    if let Some(path) = &a.scores {
        let records = read_scores_csv(path).map_err(|e| CliError::MalformedScores(e.to_string()))?;
        let scores: Vec<f64> = records.iter().map(|r| r.igo_pqa).collect();
        check_scores(&scores)?;
        writeln!(out, "frame_id,igo_pqa,bin")?;
        for r in &records {
            writeln!(out, "{},{},{}", r.frame_id, r.igo_pqa, bin_score(r.igo_pqa, &cfg.binning))?;
        }
        return Ok(());
    }
    if a.values.is_empty() {
        return Err(CliError::Usage("bin needs --scores or at least one value".into()));
    }
    check_scores(&a.values)?;
    for &v in &a.values {
        writeln!(out, "{v} {}", bin_score(v, &cfg.binning))?;
    }
    Ok(())
}

/// Targets by frame id, from a scores file or by fitting `frames`.
fn targets(cfg: &PipelineConfig, frames: &[Frame], data: &Path, scores: Option<&Path>) -> Result<(Vec<f64>, String)> {
    let default = data.join("scores.csv");
    let path: Option<PathBuf> = match scores {
        Some(p) => Some(p.to_path_buf()),
        None => default.is_file().then_some(default),
    };
    let (records, source): (Vec<QualityRecord>, String) = match path {
        Some(p) => (
            read_scores_csv(&p).map_err(|e| CliError::MalformedScores(e.to_string()))?,
            p.display().to_string(),
        ),
        None => {
            let scoring = cfg.scoring();
            (fit_dataset(frames, &scoring)?.records(frames, &scoring.binning), "fitted".into())
        }
    };
    let by_id: HashMap<&str, f64> = records.iter().map(|r| (r.frame_id.as_str(), r.igo_pqa)).collect();
    let values = frames
        .iter()
        .map(|f| {
            by_id
                .get(f.frame_id.as_str())
                .copied()
                .ok_or_else(|| CliError::MalformedScores(format!("no score for frame {}", f.frame_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    check_scores(&values)?;
    Ok((values, source))
}

fn samples(frames: Vec<Frame>, targets: &[f64]) -> Vec<(String, Vec<igo_core::Point>, f64)> {
    frames
        .into_iter()
        .zip(targets)
        .map(|(f, &t)| (f.frame_id, f.points, t))
        .collect()
}

pub fn train(cfg: &PipelineConfig, a: &TrainArgs, jobs: Option<usize>, out: Out) -> Result<()> {
    let frames = load_frames(&a.data)?;
    let (values, source) = targets(cfg, &frames, &a.data, a.scores.as_deref())?;
    let data = prepare(&samples(frames, &values), &cfg.model);
    let mut tc = cfg.train.clone();
    if let Some(j) = jobs {
        tc.workers = j;
    }
    let mut model = Model::<f32>::new(cfg.model.clone())?;
    let start = Instant::now();
    let history = fit_model(&mut model, &data, &tc, |e| {
        let _ = writeln!(out, "epoch {:>4}  loss {:>9.4}  lr {:.3e}  {:.2}s", e.epoch, e.loss, e.lr, e.seconds);
    })?;
    let seconds = start.elapsed().as_secs_f64();
    fs::create_dir_all(&a.out)?;
    save_checkpoint(
        &model,
        json!({"train": tc, "targets": source, "config_hash": cfg.config_hash()}),
        a.out.join("checkpoint.bin"),
    )?;
    history.write_csv(a.out.join("loss.csv"))?;
    let eval = evaluate(&model, &data)?;
    write_json(
        &a.out.join("train_report.json"),
        &json!({
            "frames": data.len(),
            "epochs": history.epochs.len(),
            "final_loss": history.final_loss(),
            "seconds": seconds,
            "targets": source,
            "train_metrics": eval.report,
            "model": cfg.model,
            "train": tc,
        }),
    )?;
    write!(out, "{}", eval.report.table("train"))?;
    Ok(())
}

pub fn eval(cfg: &PipelineConfig, a: &EvalArgs, out: Out) -> Result<()> {
    let (model, _) = load_checkpoint(&a.checkpoint)?;
    let frames = load_frames(&a.data)?;
    let (values, source) = targets(cfg, &frames, &a.data, a.scores.as_deref())?;
    let data = prepare(&samples(frames, &values), model.config());
    let eval = evaluate(&model, &data)?;
    let dir = match &a.out {
        Some(d) => d.clone(),
        None => a.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir)?;
    }
    write_json(
        &dir.join("metrics.json"),
        &json!({
            "label": a.label,
            "checkpoint": a.checkpoint.display().to_string(),
            "targets": source,
            "plcc": eval.report.plcc,
            "srcc": eval.report.srcc,
            "mean_l1": eval.report.mean_l1,
            "n": eval.report.n,
        }),
    )?;
    write!(out, "{}", eval.report.table(&a.label))?;
    Ok(())
}

pub fn report(cfg: &PipelineConfig, a: &ReportArgs, out: Out) -> Result<()> {
    let records = read_scores_csv(&a.scores).map_err(|e| CliError::MalformedScores(e.to_string()))?;
    let scores: Vec<f64> = records.iter().map(|r| r.igo_pqa).collect();
    let counts = bin_counts(&scores, &cfg.binning)?;
    let hist = histogram(&scores, a.bins)?;
    fs::create_dir_all(&a.out)?;
    write_json(&a.out.join("bin_counts.json"), &json!(counts))?;
    write_text(&a.out.join("histogram.csv"), &hist.to_csv())?;
    write_text(&a.out.join("histogram.svg"), &hist.to_svg(&cfg.binning))?;
    if let Some(dir) = &a.saliency_data {
        let frames = load_frames(dir)?;
        let sal_dir = a.out.join("saliency");
        fs::create_dir_all(&sal_dir)?;
        frames
            .par_iter()
            .map(|frame| -> Result<()> {
                let maps = frame_saliency_maps(frame, &cfg.saliency)?;
                for (cam, map) in frame.cameras.iter().zip(&maps) {
                    let name = format!("{}_{}.png", frame.frame_id, cam.calib.camera_id);
                    write_gray_png(&map.to_gray(), &sal_dir.join(name))?;
                }
                Ok(())
            })
            .collect::<Result<()>>()?;
    }
    writeln!(out, "{:<8} {:>6}", "bin", "count")?;
    for (b, c) in QualityBin::ALL.iter().zip([counts.low, counts.medium, counts.high]) {
        writeln!(out, "{:<8} {:>6}", b.as_str(), c)?;
    }
    writeln!(out, "{:<8} {:>6}", "total", counts.n)?;
    Ok(())
}
