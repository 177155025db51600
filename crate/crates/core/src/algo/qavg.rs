use super::runner::run_rounds;
use super::{Algorithm, FedConfig, TrainTrace};
use crate::env::FederatedTask;
use crate::error::{Error, Result};
use crate::mdp::{bellman_optimality, Table, TabularMdp};

/// `Q <- (1 - eta) Q + eta T_k Q` with agent `k`'s own exact dynamics.
///
/// The effective step is `min(eta, 1)`: the theoretical schedule starts above
/// one for small `t + E`, and a step beyond one would leave the convex hull
/// of `Q` and `T_k Q`, breaking the `[0, 1/(1-gamma)]` range of the iterates.
pub(super) fn local_step(env: &TabularMdp, q: &Table, eta: f64) -> Table {
    let eta = eta.min(1.0);
    let mut next = bellman_optimality(env, q);
    for (n, old) in next.as_mut_slice().iter_mut().zip(q.as_slice()) {
        *n = (1.0 - eta) * old + eta * *n;
    }
    next
}

/// Federated Q-iteration: exact local Bellman updates, Q tables averaged
/// every `E` rounds. Traces carry the sup-norm gap of the running average to
/// the optimal Q of the averaged environment.
pub fn qavg_train(task: &FederatedTask, config: &FedConfig) -> Result<TrainTrace> {
    if config.algorithm != Algorithm::Qavg {
        return Err(Error::invalid(format!(
            "qavg_train called with algorithm {}",
            config.algorithm
        )));
    }
    run_rounds(task, config, true)
}
