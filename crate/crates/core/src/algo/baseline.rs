use super::runner::run_rounds;
use super::{FedConfig, TrainTrace};
use crate::env::FederatedTask;
use crate::error::Result;

/// Independent learning: the configured algorithm's local updates without
/// any aggregation. The recorded objective at each step is the mean over
/// agents of every local model's federated objective; `q_gap` and
/// `grad_map_norm` describe the (never broadcast) average model.
pub fn independent_baseline(task: &FederatedTask, config: &FedConfig) -> Result<TrainTrace> {
    run_rounds(task, config, false)
}
