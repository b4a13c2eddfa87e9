use igo_core::Error as CoreError;
use igo_regressor::RegressorError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("malformed scores: {0}")]
    MalformedScores(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Regressor(#[from] RegressorError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

fn core_code(e: &CoreError) -> i32 {
    match e {
        CoreError::InvalidConfig(_) => EXIT_USAGE,
        CoreError::NonPositiveDMax(_)
        | CoreError::DegenerateRange(_)
        | CoreError::TooFewSamples { .. }
        | CoreError::ZeroVariance => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

impl CliError {
    /// 2 usage, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::MalformedScores(_) | CliError::Io(_) => EXIT_DATA,
            CliError::Core(e) => core_code(e),
            CliError::Regressor(e) => match e {
                RegressorError::Core(c) => core_code(c),
                RegressorError::NotDivisible { .. }
                | RegressorError::OddDim(_)
                | RegressorError::InvalidConfig(_)
                | RegressorError::VoxelStub => EXIT_USAGE,
                RegressorError::Tensor(_) | RegressorError::NonFiniteLoss { .. } => EXIT_NUMERIC,
                _ => EXIT_DATA,
            },
        }
    }
}
