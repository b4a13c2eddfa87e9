//! No-reference point-cloud quality regressor.
//!
//! Points are binned into BEV pillars, encoded by a small conv backbone and
//! split into `P×P` patches that act as transformer queries. After a
//! self-attention encoder, a decoder cross-attends from the queries to every
//! BEV cell; a per-query MLP head predicts scores that are averaged.

pub mod checkpoint;
pub mod config;
pub mod encoding;
pub mod error;
pub mod model;
pub mod pillar;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{Backbone, ModelConfig, PeKind};
pub use encoding::positional_encoding;
pub use error::{RegressorError, Result};
pub use model::{patchify, Forward, Model, ModelInput};
pub use pillar::{pillar_features, PillarFeatures, RAW_FEATURES};
pub use train::{
    adamw_step, cyclic_lr, evaluate, l1_loss, l2_loss, predict_all, prepare, train, AdamParams, AdamState,
    EpochStats, Evaluation, LossKind, Prepared, TrainConfig, TrainHistory,
};
