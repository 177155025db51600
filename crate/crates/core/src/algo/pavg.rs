use super::runner::run_rounds;
use super::{Algorithm, FedConfig, TrainTrace};
use crate::env::FederatedTask;
use crate::error::{Error, Result};
use crate::mdp::{
    exact_policy_gradient, project_rows_to_simplex, softmax_gradient, LogitTable,
    StateDistribution, StochasticPolicy, Table, TabularMdp,
};

/// `pi <- Proj_simplex(pi + eta * grad g_k(pi))`, row by row.
pub(super) fn projected_step(
    env: &TabularMdp,
    d0: &StateDistribution,
    params: &Table,
    eta: f64,
) -> Result<Table> {
    let policy = StochasticPolicy::new(params.clone())?;
    let grad = exact_policy_gradient(env, &policy, d0)?;
    let mut moved = params.clone();
    moved.add_scaled(eta, &grad);
    Ok(project_rows_to_simplex(&moved)?.into_table())
}

/// `theta <- theta + eta * grad_theta g_k(softmax(theta))`.
pub(super) fn softmax_step(
    env: &TabularMdp,
    d0: &StateDistribution,
    params: &Table,
    eta: f64,
) -> Result<Table> {
    let grad = softmax_gradient(env, &LogitTable(params.clone()), d0)?;
    let mut next = params.clone();
    next.add_scaled(eta, &grad);
    Ok(next)
}

/// Euclidean norm of the gradient mapping
/// `G(pi) = (Proj(pi + eta * mean_k grad g_k(pi)) - pi) / eta`
/// of the federated objective.
pub fn gradient_mapping_norm(
    task: &FederatedTask,
    policy: &StochasticPolicy,
    eta: f64,
) -> Result<f64> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::invalid(format!(
            "step size must be positive, got {eta}"
        )));
    }
    let grads = task
        .envs()
        .iter()
        .map(|env| exact_policy_gradient(env, policy, task.d0()))
        .collect::<Result<Vec<_>>>()?;
    let mean_grad = Table::mean(&grads)?;
    let mut moved = policy.table().clone();
    moved.add_scaled(eta, &mean_grad);
    let projected = project_rows_to_simplex(&moved)?;
    let norm_sq: f64 = projected
        .table()
        .as_slice()
        .iter()
        .zip(policy.table().as_slice())
        .map(|(p, q)| {
            let g = (p - q) / eta;
            g * g
        })
        .sum();
    Ok(norm_sq.sqrt())
}

/// Federated policy gradient. `projpavg` takes projected gradient steps on
/// the policy table and averages policies; `softpavg` takes gradient steps
/// on softmax logits and averages logits.
pub fn pavg_train(task: &FederatedTask, config: &FedConfig) -> Result<TrainTrace> {
    if config.algorithm == Algorithm::Qavg {
        return Err(Error::invalid("pavg_train called with algorithm qavg"));
    }
    run_rounds(task, config, true)
}
