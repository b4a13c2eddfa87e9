//! Agreement metrics between predicted and reference scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub plcc: f64,
    pub srcc: f64,
    pub mean_l1: f64,
    pub n: usize,
}

impl MetricReport {
    pub fn compute(pred: &[f64], target: &[f64]) -> Result<Self> {
        Ok(Self {
            plcc: plcc(pred, target)?,
            srcc: srcc(pred, target)?,
            mean_l1: mean_l1(pred, target)?,
            n: pred.len(),
        })
    }

    /// Aligned text table with PLCC / SRCC / Avg. L1 columns.
    pub fn table(&self, label: &str) -> String {
        let width = label.len().max(7);
        format!(
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>6}\n{:<width$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>6}\n",
            "Split", "PLCC", "SRCC", "Avg. L1", "N", label, self.plcc, self.srcc, self.mean_l1, self.n,
        )
    }
}

fn check_pair(a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < min {
        return Err(Error::TooFewSamples {
            need: min,
            got: a.len(),
        });
    }
    Ok(())
}

/// Pearson linear correlation.
pub fn plcc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 2)?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average ranks.
pub fn srcc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 2)?;
    plcc(&average_ranks(a), &average_ranks(b))
}

pub fn mean_l1(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 1)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}
