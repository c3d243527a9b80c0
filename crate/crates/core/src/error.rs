use crate::bench::BenchError;
use crate::corpus::CorpusError;
use crate::model::ModelError;
use crate::negmine::MineError;
use crate::objectives::ObjectiveError;
use crate::synth::SynthError;

/// Any failure of a pipeline stage.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Mine(#[from] MineError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), source }
    }

    /// 3 for numeric failure during training, 2 for everything else. Usage errors (1)
    /// are reported by the argument parser before any stage runs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Model(ModelError::NonFiniteLoss { .. }) => 3,
            Error::Objective(ObjectiveError::NonFiniteInput(_)) => 3,
            _ => 2,
        }
    }
}
