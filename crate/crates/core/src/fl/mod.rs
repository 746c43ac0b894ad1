//! Federated learning simulation: partitioning, local training, FedAvg,
//! and the per-method round loop.

mod experiment;
mod model;
mod partition;
mod train;

use thiserror::Error;

use crate::metrics::MetricsError;
use crate::selection::SelectionError;

pub use experiment::{run_experiment, ExperimentRun, ExperimentSetup, Federation, Method};
pub use model::{loss_and_grad, predict, Architecture, GlobalModel};
pub use partition::{dirichlet_partition, sample_dirichlet, stratified_split};
pub use train::{evaluate, fedavg_aggregate, local_train, Evaluation, TrainConfig};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("selection is empty")]
    EmptySelection,
    #[error("no update from client {0}")]
    UnknownClient(usize),
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamCount { expected: usize, got: usize },
    #[error(
        "model expects {model_input} features / {model_classes} classes, data has {data_dims} / {data_classes}"
    )]
    ShapeMismatch {
        model_input: usize,
        model_classes: usize,
        data_dims: usize,
        data_classes: usize,
    },
    #[error("{samples} samples cannot cover {clients} clients")]
    TooFewSamples { samples: usize, clients: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("unknown method `{0}` (expected fedavg_full, qubo or random)")]
    UnknownMethod(String),
    #[error("random selection needs the QUBO run's per-round selection sizes")]
    MissingReferenceSizes,
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}
