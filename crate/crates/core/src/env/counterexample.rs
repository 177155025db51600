use super::FederatedTask;
use crate::error::{Error, Result};
use crate::mdp::{StateDistribution, TabularMdp};

const GAMMA: f64 = 0.9;
/// `R(s, a)` for `(s0,a0), (s0,a1), (s1,a0), (s1,a1)`.
const REWARDS: [f64; 4] = [10.0, 1000.0, 0.0, -2.0];
/// Base successor of `(s0,a0), (s0,a1), (s1,a0), (s1,a1)` per environment.
const SUCCESSORS: [[usize; 4]; 2] = [[0, 1, 1, 1], [0, 0, 1, 0]];

/// Two-state, two-action, two-environment task whose optimal policy depends
/// on the initial distribution. Every transition sends `1 - tau` of its mass
/// to the base successor and `tau` to the other state; `d0` is `s0`.
///
/// From `s0` the second environment never visits `s1` at `tau = 0`, so the
/// best policy from `s0` never pays the `-2` of `a1` in `s1`; started in
/// `s1`, paying it is the only way back to the `1000` reward of `s0`.
pub fn make_counterexample_task(tau: f64) -> Result<FederatedTask> {
    if !(0.0..0.5).contains(&tau) {
        return Err(Error::invalid(format!(
            "leak probability must lie in [0, 0.5), got {tau}"
        )));
    }
    let envs = SUCCESSORS
        .iter()
        .map(|succ| {
            let mut p = vec![0.0; 8];
            for (row, &next) in succ.iter().enumerate() {
                p[row * 2 + next] = 1.0 - tau;
                p[row * 2 + (1 - next)] = tau;
            }
            TabularMdp::new(2, 2, REWARDS.to_vec(), p, GAMMA)
        })
        .collect::<Result<Vec<_>>>()?;
    FederatedTask::new(envs, StateDistribution::point(2, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{greedy_policy, policy_evaluation, q_value_iteration, StochasticPolicy};

    #[test]
    fn second_env_never_reaches_s1_from_s0() {
        let task = make_counterexample_task(0.0).unwrap();
        let env2 = task.env(1);
        assert_eq!(env2.transition_row(0, 0), &[1.0, 0.0]);
        assert_eq!(env2.transition_row(0, 1), &[1.0, 0.0]);
    }

    #[test]
    fn second_env_optimum() {
        let task = make_counterexample_task(0.0).unwrap();
        let env2 = task.env(1);
        let q = q_value_iteration(env2, 1e-10, 100_000).unwrap();
        assert!((q.get(0, 1) - 10_000.0).abs() < 1e-6);
        assert_eq!(greedy_policy(&q).row(0), &[0.0, 1.0]);

        // enumerate the four deterministic policies
        let best = (0..4)
            .map(|code| {
                let pi = StochasticPolicy::deterministic(&[code & 1, code >> 1], 2).unwrap();
                policy_evaluation(env2, &pi).unwrap()[0]
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - 10_000.0).abs() < 1e-8);
    }

    #[test]
    fn leak_range() {
        assert!(make_counterexample_task(0.5).is_err());
        assert!(make_counterexample_task(-0.1).is_err());
        let leaky = make_counterexample_task(0.01).unwrap();
        assert!((leaky.env(0).transition_row(0, 0)[1] - 0.01).abs() < 1e-15);
    }
}
