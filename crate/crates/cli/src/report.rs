//! Per-bin counts and the score histogram.

use std::fmt::Write as _;

use igo_core::{bin_score, BinningConfig, QualityBin};
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BinCounts {
    pub low: usize,
    pub medium: usize,
    pub high: usize,
    pub n: usize,
}

/// Bins are recomputed from the scores with the configured thresholds.
pub fn bin_counts(scores: &[f64], cfg: &BinningConfig) -> Result<BinCounts> {
    check_scores(scores)?;
    let mut c = BinCounts {
        low: 0,
        medium: 0,
        high: 0,
        n: scores.len(),
    };
    for &s in scores {
        match bin_score(s, cfg) {
            QualityBin::Low => c.low += 1,
            QualityBin::Medium => c.medium += 1,
            QualityBin::High => c.high += 1,
        }
    }
    Ok(c)
}

pub fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(CliError::MalformedScores("no scores".into()));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=100.0).contains(*s)) {
        return Err(CliError::MalformedScores(format!("score {s} is outside [0, 100]")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges over `[0, 100]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width bins over `[0, 100]`, half-open except the last, which
/// includes 100.
pub fn histogram(scores: &[f64], bins: usize) -> Result<Histogram> {
    check_scores(scores)?;
    if bins == 0 {
        return Err(CliError::Usage("histogram needs at least one bin".into()));
    }
    let width = 100.0 / bins as f64;
    let edges = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0; bins];
    for &s in scores {
        counts[((s / width).floor() as usize).min(bins - 1)] += 1;
    }
    Ok(Histogram { edges, counts })
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", self.edges[i], self.edges[i + 1], c);
        }
        out
    }

    /// Standalone bar chart with the bin thresholds drawn as dashed lines.
    pub fn to_svg(&self, cfg: &BinningConfig) -> String {
        let (w, h) = (640.0, 360.0);
        let (left, right, top, bottom) = (50.0, 20.0, 30.0, 40.0);
        let (pw, ph) = (w - left - right, h - top - bottom);
        let peak = self.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let x = |score: f64| left + pw * score / 100.0;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="18" font-family="sans-serif" font-size="14" text-anchor="middle">IGO-PQA score distribution (n = {})</text>"#,
            w / 2.0,
            self.counts.iter().sum::<usize>()
        );
        for (i, &c) in self.counts.iter().enumerate() {
            let bh = ph * c as f64 / peak;
            let (x0, x1) = (x(self.edges[i]), x(self.edges[i + 1]));
            let _ = writeln!(
                s,
                r##"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="#4a7ab5" stroke="white"/>"##,
                top + ph - bh,
                x1 - x0
            );
        }
        let base = top + ph;
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
            left + pw
        );
        let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="black"/>"#);
        for tick in [0.0, 25.0, 50.0, 75.0, 100.0] {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{tick}</text>"#,
                x(tick),
                base + 16.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="12" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            top + 4.0,
            peak as usize
        );
        for t in [cfg.low_upper, cfg.high_lower] {
            let _ = writeln!(
                s,
                r##"<line x1="{0:.2}" y1="{top}" x2="{0:.2}" y2="{base}" stroke="#c0392b" stroke-dasharray="4 3"/>"##,
                x(t)
            );
        }
        for (label, lo, hi) in [
            ("low", 0.0, cfg.low_upper),
            ("medium", cfg.low_upper, cfg.high_lower),
            ("high", cfg.high_lower, 100.0),
        ] {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{label}</text>"#,
                x((lo + hi) / 2.0),
                base + 32.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
