//! Link inference: the model, its training loop, metrics and checkpoints.

pub mod checkpoint;
pub mod metrics;
pub mod model;
pub mod train;

use thiserror::Error;

pub use checkpoint::CheckpointError;
pub use metrics::{MetricError, Metrics};
pub use model::{LayerSpec, LinkInput, LinnModel, ModelSpec};
pub use train::{evaluate, predict, train, train_with_progress, TrainConfig};

use crate::nn::NnError;
use crate::tde::TdeError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinnError {
    #[error(transparent)]
    Encoder(#[from] TdeError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("non-finite gradient for `{param}` in batch {batch}")]
    NonFiniteGradient { batch: usize, param: String },
}
