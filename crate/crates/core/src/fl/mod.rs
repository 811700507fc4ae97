//! Toy-scale federated learning: the workload the protocol protects.

mod data;
mod metrics;
mod model;
mod train;

use thiserror::Error;

pub use data::{make_federation, Dataset, FederationDescriptor, SyntheticTask, CLASS_SEPARATION};
pub use metrics::{auc, evaluate, Metrics};
pub use model::{Model, ModelKind, ModelParams};
pub use train::{apply_update, clip_l2, fedavg_aggregate, local_train, TrainConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("empty round: no updates to aggregate")]
    EmptyRound,
    #[error("invalid training configuration: {0}")]
    Config(String),
}
