use super::{pavg, qavg, Algorithm, FedConfig, Init, Model, TraceRecord, TrainTrace};
use crate::env::{imaginary_mdp, FederatedTask};
use crate::error::Result;
use crate::mdp::{
    greedy_policy, q_value_iteration, softmax_policy, LogitTable, QTable, StochasticPolicy, Table,
};

const ORACLE_TOL: f64 = 1e-10;
const ORACLE_MAX_ITER: usize = 1_000_000;

/// Parameter table of one agent: Q values, policy probabilities or logits,
/// depending on the algorithm.
fn init_params(config: &FedConfig, task: &FederatedTask) -> Table {
    let (ns, na) = (task.num_states(), task.num_actions());
    match (config.algorithm, config.init) {
        (Algorithm::ProjPavg, _) => StochasticPolicy::uniform(ns, na).into_table(),
        (_, Init::Zeros | Init::Uniform) => Table::zeros(ns, na),
    }
}

pub(super) fn policy_of(algorithm: Algorithm, params: &Table) -> Result<StochasticPolicy> {
    Ok(match algorithm {
        Algorithm::Qavg => greedy_policy(params),
        Algorithm::ProjPavg => StochasticPolicy::new(params.clone())?,
        Algorithm::SoftPavg => softmax_policy(&LogitTable(params.clone())),
    })
}

fn model_of(algorithm: Algorithm, params: Table) -> Result<Model> {
    Ok(match algorithm {
        Algorithm::Qavg => Model::Q(QTable(params)),
        Algorithm::ProjPavg => Model::Policy(StochasticPolicy::new(params)?),
        Algorithm::SoftPavg => Model::Logits(LogitTable(params)),
    })
}

fn local_step(
    algorithm: Algorithm,
    task: &FederatedTask,
    k: usize,
    params: &Table,
    eta: f64,
) -> Result<Table> {
    let env = task.env(k);
    match algorithm {
        Algorithm::Qavg => Ok(qavg::local_step(env, params, eta)),
        Algorithm::ProjPavg => pavg::projected_step(env, task.d0(), params, eta),
        Algorithm::SoftPavg => pavg::softmax_step(env, task.d0(), params, eta),
    }
}

/// Runs `T` lockstep rounds. With `communicate == false` no averaging ever
/// happens and the recorded objective is the baseline metric: the mean over
/// agents of each local model's federated objective.
pub(super) fn run_rounds(
    task: &FederatedTask,
    config: &FedConfig,
    communicate: bool,
) -> Result<TrainTrace> {
    config.validate()?;
    let algorithm = config.algorithm;
    let gamma = task.gamma();
    let q_star = match algorithm {
        Algorithm::Qavg => Some(q_value_iteration(
            &imaginary_mdp(task),
            ORACLE_TOL,
            ORACLE_MAX_ITER,
        )?),
        _ => None,
    };

    let record = |round: u64, locals: &[Table], aggregated: bool| -> Result<TraceRecord> {
        let mean = Table::mean(locals)?;
        let objective = if communicate {
            task.objective(&policy_of(algorithm, &mean)?)?
        } else {
            let mut total = 0.0;
            for local in locals {
                total += task.objective(&policy_of(algorithm, local)?)?;
            }
            total / locals.len() as f64
        };
        let q_gap = q_star.as_ref().map(|q| mean.sup_distance(q));
        let grad_map_norm = match algorithm {
            Algorithm::Qavg => None,
            _ => {
                let eta = config.step(round.saturating_sub(1), gamma)?;
                Some(pavg::gradient_mapping_norm(
                    task,
                    &policy_of(algorithm, &mean)?,
                    eta,
                )?)
            }
        };
        Ok(TraceRecord {
            iter: round,
            objective,
            q_gap,
            grad_map_norm,
            aggregated,
        })
    };

    let mut locals = vec![init_params(config, task); task.n()];
    let mut records = vec![record(0, &locals, false)?];
    for t in 0..config.total_iters {
        let eta = config.step(t, gamma)?;
        for (k, local) in locals.iter_mut().enumerate() {
            *local = local_step(algorithm, task, k, local, eta)?;
        }
        let round = t + 1;
        let aggregated = communicate
            && config
                .local_updates
                .aggregates_after(round, config.total_iters);
        if aggregated {
            let mean = Table::mean(&locals)?;
            locals.iter_mut().for_each(|l| l.clone_from(&mean));
        }
        if config.records_after(round) {
            records.push(record(round, &locals, aggregated)?);
        }
    }

    let (aggregate, agents) = if communicate {
        let mean = locals.swap_remove(0);
        (Some(model_of(algorithm, mean)?), Vec::new())
    } else {
        let agents = locals
            .into_iter()
            .map(|l| model_of(algorithm, l))
            .collect::<Result<Vec<_>>>()?;
        (None, agents)
    };
    Ok(TrainTrace {
        algorithm,
        seed: config.seed,
        records,
        aggregate,
        agents,
    })
}
