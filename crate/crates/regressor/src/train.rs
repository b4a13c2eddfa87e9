//! Optimization loop: per-sample L1 (or L2) loss, AdamW, triangular cyclic
//! learning rate, global-norm gradient clipping.
//!
//! A batch is processed as independent per-sample replicas whose gradients
//! are summed in batch order, so results do not depend on the worker count.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use igo_core::{MetricReport, Point};
use igo_tensor::{Graph, ParamStore, Scalar, Tensor, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{RegressorError, Result};
use crate::model::{Model, ModelInput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    L1,
    L2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub max_lr: f64,
    /// Steps per triangular learning-rate cycle.
    pub cycle_len: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Global gradient L2-norm ceiling; 0 disables clipping.
    pub grad_clip: f64,
    pub loss: LossKind,
    /// Replicas evaluated concurrently within a batch; 1 runs inline.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 28,
            batch_size: 8,
            base_lr: 2e-4,
            max_lr: 2e-3,
            cycle_len: 56,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            seed: 0,
            grad_clip: 10.0,
            loss: LossKind::L1,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RegressorError::InvalidConfig(m.into()));
        if !(self.base_lr > 0.0 && self.base_lr <= self.max_lr && self.max_lr.is_finite()) {
            return bad("learning rates must satisfy 0 < base_lr <= max_lr");
        }
        if self.cycle_len < 2 {
            return bad("cycle length must be at least 2");
        }
        if self.batch_size < 1 {
            return bad("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return bad("adam constants out of range");
        }
        if !(self.weight_decay >= 0.0 && self.grad_clip >= 0.0) {
            return bad("weight decay and clip must be non-negative");
        }
        Ok(())
    }

    pub fn adam(&self, lr: f64) -> AdamParams {
        AdamParams {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

/// `mean |pred − target|`; the subgradient at a tie is 0.
pub fn l1_loss<T: Scalar>(g: &mut Graph<T>, pred: Var, target: Var) -> Result<Var> {
    let d = g.sub(pred, target)?;
    let a = g.abs(d);
    Ok(g.mean_all(a))
}

/// `mean (pred − target)²`.
pub fn l2_loss<T: Scalar>(g: &mut Graph<T>, pred: Var, target: Var) -> Result<Var> {
    let d = g.sub(pred, target)?;
    let sq = g.mul(d, d)?;
    Ok(g.mean_all(sq))
}

/// Triangular wave: `base → max` over the first half cycle, back to `base`
/// over the second.
pub fn cyclic_lr(step: usize, base_lr: f64, max_lr: f64, cycle_len: usize) -> f64 {
    assert!(cycle_len >= 2, "cycle length must be at least 2");
    let half = cycle_len as f64 / 2.0;
    let pos = (step % cycle_len) as f64;
    let frac = if pos <= half { pos / half } else { (cycle_len as f64 - pos) / half };
    base_lr + (max_lr - base_lr) * frac
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

/// First and second moments per parameter, plus the step count.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn zeros(params: &ParamStore<T>) -> Self {
        let z: Vec<Vec<T>> = params.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect();
        Self {
            m: z.clone(),
            v: z,
            t: 0,
        }
    }
}

/// One AdamW update with bias-corrected moments and decoupled decay:
/// `p ← p − lr·λ·p − lr·m̂ / (√v̂ + eps)`.
pub fn adamw_step<T: Scalar>(
    params: &mut ParamStore<T>,
    grads: &[Vec<T>],
    state: &mut AdamState<T>,
    h: &AdamParams,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(RegressorError::ShapeMismatch(format!(
            "{} params, {} grads, {} moments",
            n,
            grads.len(),
            state.m.len()
        )));
    }
    for (i, g) in grads.iter().enumerate() {
        let len = params.tensor(i).len();
        if g.len() != len || state.m[i].len() != len || state.v[i].len() != len {
            return Err(RegressorError::ShapeMismatch(format!(
                "parameter {} has {len} values, gradient {}",
                params.name(i),
                g.len()
            )));
        }
    }
    state.t += 1;
    let c = |x: f64| T::from_f64_lossy(x);
    let (b1, b2) = (c(h.beta1), c(h.beta2));
    let (one_b1, one_b2) = (c(1.0 - h.beta1), c(1.0 - h.beta2));
    let bc1 = c(1.0 - h.beta1.powi(state.t as i32));
    let bc2 = c(1.0 - h.beta2.powi(state.t as i32));
    let (lr, eps, decay) = (c(h.lr), c(h.eps), c(h.lr * h.weight_decay));
    for (i, g) in grads.iter().enumerate() {
        let p = params.tensor_mut(i).data_mut();
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..p.len() {
            m[j] = b1 * m[j] + one_b1 * g[j];
            v[j] = b2 * v[j] + one_b2 * g[j] * g[j];
            let mh = m[j] / bc1;
            let vh = v[j] / bc2;
            p[j] = p[j] - decay * p[j] - lr * mh / (vh.sqrt() + eps);
        }
    }
    Ok(())
}

/// A training or evaluation example with its inputs precomputed.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub id: String,
    pub target: f64,
    pub input: ModelInput<f32>,
}

/// Pillarizes every cloud once.
pub fn prepare(samples: &[(String, Vec<Point>, f64)], cfg: &ModelConfig) -> Vec<Prepared> {
    samples
        .par_iter()
        .map(|(id, points, target)| Prepared {
            id: id.clone(),
            target: *target,
            input: ModelInput::from_points(points, cfg),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-sample loss over the epoch, measured before each update.
    pub loss: f64,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }

    /// `epoch,loss,lr` lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,lr\n");
        for e in &self.epochs {
            writeln!(s, "{},{},{}", e.epoch, e.loss, e.lr).expect("string write");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn sample_loss_and_grads(
    model: &Model<f32>,
    sample: &Prepared,
    loss: LossKind,
) -> Result<(f64, Vec<Vec<f32>>)> {
    let mut g = Graph::new();
    let vars = model.params().bind(&mut g);
    let f = model.forward(&mut g, &vars, &sample.input)?;
    let t = g.constant(Tensor::scalar(sample.target as f32));
    let l = match loss {
        LossKind::L1 => l1_loss(&mut g, f.score, t)?,
        LossKind::L2 => l2_loss(&mut g, f.score, t)?,
    };
    let value = g.value(l).data()[0] as f64;
    g.backward(l)?;
    Ok((value, model.params().collect_grads(&g, &vars)))
}

/// Trains `model` in place. `on_epoch` sees every epoch's stats as they
/// complete.
pub fn train(
    model: &mut Model<f32>,
    data: &[Prepared],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainHistory> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(RegressorError::EmptyTrainingSet);
    }
    if let Some(s) = data.iter().find(|s| !(0.0..=100.0).contains(&s.target)) {
        return Err(RegressorError::TargetOutOfRange(s.target));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::zeros(model.params());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut lr = cfg.base_lr;
        for batch in order.chunks(cfg.batch_size) {
            let run = |&i: &usize| sample_loss_and_grads(model, &data[i], cfg.loss);
            let results: Vec<_> = if cfg.workers > 1 {
                batch.par_iter().map(run).collect::<Result<_>>()?
            } else {
                batch.iter().map(run).collect::<Result<_>>()?
            };
            let mut grads: Option<Vec<Vec<f32>>> = None;
            for (l, g) in results {
                if !l.is_finite() {
                    return Err(RegressorError::NonFiniteLoss {
                        epoch,
                        step,
                        detail: format!("sample loss {l}"),
                    });
                }
                loss_sum += l;
                match grads.as_mut() {
                    None => grads = Some(g),
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(&g) {
                            for (x, y) in a.iter_mut().zip(b) {
                                *x += *y;
                            }
                        }
                    }
                }
            }
            let mut grads = grads.expect("non-empty batch");
            let inv = 1.0 / batch.len() as f32;
            let mut norm2 = 0.0f64;
            for x in grads.iter_mut().flatten() {
                *x *= inv;
                norm2 += (*x as f64) * (*x as f64);
            }
            let norm = norm2.sqrt();
            if !norm.is_finite() {
                return Err(RegressorError::NonFiniteLoss {
                    epoch,
                    step,
                    detail: format!("gradient norm {norm}"),
                });
            }
            if cfg.grad_clip > 0.0 && norm > cfg.grad_clip {
                let s = (cfg.grad_clip / norm) as f32;
                grads.iter_mut().flatten().for_each(|x| *x *= s);
            }
            lr = cyclic_lr(step, cfg.base_lr, cfg.max_lr, cfg.cycle_len);
            adamw_step(model.params_mut(), &grads, &mut state, &cfg.adam(lr))?;
            step += 1;
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / data.len() as f64,
            lr,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&stats);
        history.epochs.push(stats);
    }
    Ok(history)
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub predictions: Vec<f64>,
    pub report: MetricReport,
}

pub fn predict_all(model: &Model<f32>, data: &[Prepared]) -> Result<Vec<f64>> {
    data.par_iter().map(|s| model.predict_input(&s.input)).collect()
}

pub fn evaluate(model: &Model<f32>, data: &[Prepared]) -> Result<Evaluation> {
    let predictions = predict_all(model, data)?;
    let targets: Vec<f64> = data.iter().map(|s| s.target).collect();
    let report = MetricReport::compute(&predictions, &targets)?;
    Ok(Evaluation {
        predictions,
        report,
    })
}
