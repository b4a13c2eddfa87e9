use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegressorError {
    #[error(transparent)]
    Tensor(#[from] igo_tensor::TensorError),

    #[error(transparent)]
    Core(#[from] igo_core::Error),

    #[error("feature map {height}x{width} is not divisible by patch size {patch}")]
    NotDivisible { height: usize, width: usize, patch: usize },

    #[error("sinusoidal encoding needs an even dimension, got {0}")]
    OddDim(usize),

    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("voxel backbone not implemented at desk scale")]
    VoxelStub,

    #[error("non-finite loss at epoch {epoch}, step {step}: {detail}")]
    NonFiniteLoss { epoch: usize, step: usize, detail: String },

    #[error("input shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("checkpoint does not match the model: {0}")]
    CheckpointMismatch(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("target {0} outside [0, 100]")]
    TargetOutOfRange(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = RegressorError> = std::result::Result<T, E>;
