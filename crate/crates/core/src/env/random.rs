use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::FederatedTask;
use crate::error::{Error, Result};
use crate::mdp::{StateDistribution, TabularMdp};
use crate::rng::{substream, tags, StreamRng};

/// How random transition rows are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionMode {
    /// Uniform on the simplex (Dirichlet with unit concentration).
    Dirichlet,
    /// Entries i.i.d. Bernoulli(1/2), all-zero rows redrawn, then normalized.
    Bernoulli,
}

fn check_sizes(num_states: usize, num_actions: usize, gamma: f64) -> Result<()> {
    if num_states == 0 || num_actions == 0 {
        return Err(Error::invalid(format!(
            "need at least one state and one action, got {num_states}x{num_actions}"
        )));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!(
            "gamma must lie in [0, 1), got {gamma}"
        )));
    }
    Ok(())
}

/// `R(s, a)` i.i.d. uniform on `[0, 1)`.
pub fn random_rewards(rng: &mut StreamRng, num_states: usize, num_actions: usize) -> Vec<f64> {
    (0..num_states * num_actions)
        .map(|_| rng.random::<f64>())
        .collect()
}

pub fn random_transitions(
    rng: &mut StreamRng,
    num_states: usize,
    num_actions: usize,
    mode: TransitionMode,
) -> Vec<f64> {
    let mut p = vec![0.0; num_states * num_actions * num_states];
    for row in p.chunks_exact_mut(num_states) {
        match mode {
            TransitionMode::Dirichlet => {
                for x in row.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *x = e;
                }
                if row.iter().all(|x| *x == 0.0) {
                    row.fill(1.0);
                }
            }
            TransitionMode::Bernoulli => loop {
                for x in row.iter_mut() {
                    *x = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
                }
                if row.iter().any(|x| *x > 0.0) {
                    break;
                }
            },
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= total);
    }
    p
}

/// One random MDP. Rewards come from the `(seed, reward, 0)` stream and
/// transitions from `(seed, transition, 0)`, so this is environment 0 of
/// [`make_random_task`] with the same seed.
pub fn make_random_mdp(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    mode: TransitionMode,
    gamma: f64,
) -> Result<TabularMdp> {
    check_sizes(num_states, num_actions, gamma)?;
    let reward = random_rewards(
        &mut substream(seed, tags::REWARD, 0),
        num_states,
        num_actions,
    );
    let transition = random_transitions(
        &mut substream(seed, tags::TRANSITION, 0),
        num_states,
        num_actions,
        mode,
    );
    TabularMdp::new(num_states, num_actions, reward, transition, gamma)
}

/// `n` random environments sharing one reward table; environment `k` draws
/// its transitions from `(seed, transition, k)`. `d0` is uniform.
pub fn make_random_task(
    seed: u64,
    n: usize,
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    mode: TransitionMode,
) -> Result<FederatedTask> {
    if n == 0 {
        return Err(Error::invalid("a federated task needs n >= 1"));
    }
    check_sizes(num_states, num_actions, gamma)?;
    let reward = random_rewards(
        &mut substream(seed, tags::REWARD, 0),
        num_states,
        num_actions,
    );
    let envs = (0..n)
        .map(|k| {
            let p = random_transitions(
                &mut substream(seed, tags::TRANSITION, k as u64),
                num_states,
                num_actions,
                mode,
            );
            TabularMdp::new(num_states, num_actions, reward.clone(), p, gamma)
        })
        .collect::<Result<Vec<_>>>()?;
    FederatedTask::new(envs, StateDistribution::uniform(num_states))
}
