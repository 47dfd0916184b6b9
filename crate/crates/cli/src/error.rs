use std::path::{Path, PathBuf};

use thiserror::Error;

/// Pipeline stage an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Data,
    Train,
    Predict,
    Allocate,
    Evaluate,
    Emit,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Data => "data",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Allocate => "allocate",
            Stage::Evaluate => "evaluate",
            Stage::Emit => "emit",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: decision_factor::Error,
}

impl PipelineError {
    pub fn new(stage: Stage, source: decision_factor::Error) -> Self {
        Self { stage, source }
    }

    pub fn config(message: String) -> Self {
        Self::new(Stage::Config, decision_factor::Error::Config(message))
    }

    pub fn io(stage: Stage, path: &Path, source: std::io::Error) -> Self {
        Self::new(
            stage,
            decision_factor::Error::Io {
                path: PathBuf::from(path),
                source,
            },
        )
    }
}

/// Tags a library result with the stage it ran in.
pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> AtStage<T> for decision_factor::Result<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}
