//! Model checkpoints: the tensor codec plus the model config in the
//! manifest metadata under `"model"`.

use std::path::Path;

use igo_tensor::checkpoint;
use serde_json::{json, Value};

use crate::config::ModelConfig;
use crate::error::{RegressorError, Result};
use crate::model::Model;

pub fn save_checkpoint(model: &Model<f32>, extra: Value, path: impl AsRef<Path>) -> Result<()> {
    let meta = json!({ "model": model.config(), "extra": extra });
    checkpoint::save(path, model.params(), meta)?;
    Ok(())
}

/// Returns the model and the `extra` metadata stored alongside it.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model<f32>, Value)> {
    let (params, meta) = checkpoint::load::<f32>(path)?;
    let cfg: ModelConfig = serde_json::from_value(
        meta.get("model")
            .cloned()
            .ok_or_else(|| RegressorError::CheckpointMismatch("metadata has no model config".into()))?,
    )?;
    let model = Model::from_params(cfg, params)?;
    Ok((model, meta.get("extra").cloned().unwrap_or(Value::Null)))
}
