//! Reference computations that share no code path with the library's
//! solvers: plain fixed-point iteration, exhaustive enumeration and finite
//! differences.
#![allow(dead_code)]

use fedmdp::env::FederatedTask;
use fedmdp::mdp::{StateDistribution, StochasticPolicy, TabularMdp};

/// `V = R_pi + gamma P_pi V` by repeated substitution until the update
/// stops moving (or 100k sweeps).
pub fn values_by_iteration(mdp: &TabularMdp, pi: &StochasticPolicy) -> Vec<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut v = vec![0.0; ns];
    for _ in 0..100_000 {
        let mut next = vec![0.0; ns];
        for (s, out) in next.iter_mut().enumerate() {
            for a in 0..na {
                let p = pi.prob(s, a);
                if p == 0.0 {
                    continue;
                }
                let future: f64 = mdp
                    .transition_row(s, a)
                    .iter()
                    .zip(&v)
                    .map(|(x, y)| x * y)
                    .sum();
                *out += p * (mdp.reward(s, a) + mdp.gamma() * future);
            }
        }
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta < 1e-13 {
            break;
        }
    }
    v
}

pub fn d0_value(mdp: &TabularMdp, pi: &StochasticPolicy, d0: &StateDistribution) -> f64 {
    values_by_iteration(mdp, pi)
        .iter()
        .zip(d0.probs())
        .map(|(v, p)| v * p)
        .sum()
}

/// Every deterministic policy, as action indices per state.
pub fn deterministic_policies(ns: usize, na: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = na.pow(ns as u32);
    (0..total).map(move |mut code| {
        (0..ns)
            .map(|_| {
                let a = code % na;
                code /= na;
                a
            })
            .collect()
    })
}

/// `max_pi Q^pi(s, a)` over deterministic policies, for every `(s, a)`.
pub fn brute_force_q_star(mdp: &TabularMdp) -> Vec<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut best = vec![f64::NEG_INFINITY; ns * na];
    for actions in deterministic_policies(ns, na) {
        let pi = StochasticPolicy::deterministic(&actions, na).unwrap();
        let v = fedmdp::mdp::policy_evaluation(mdp, &pi).unwrap();
        for s in 0..ns {
            for a in 0..na {
                let future: f64 = mdp
                    .transition_row(s, a)
                    .iter()
                    .zip(v.iter())
                    .map(|(x, y)| x * y)
                    .sum();
                let q = mdp.reward(s, a) + mdp.gamma() * future;
                best[s * na + a] = best[s * na + a].max(q);
            }
        }
    }
    best
}

/// The kappa1 definition evaluated at one policy: the largest over states of
/// `sum_i sum_s' |P_i^pi(s'|s) - mean_j P_j^pi(s'|s)|`.
pub fn kappa1_at(task: &FederatedTask, pi: &StochasticPolicy) -> f64 {
    let (ns, na, n) = (task.num_states(), task.num_actions(), task.n());
    let mut worst = 0.0_f64;
    for s in 0..ns {
        let rows: Vec<Vec<f64>> = task
            .envs()
            .iter()
            .map(|env| {
                let mut row = vec![0.0; ns];
                for a in 0..na {
                    for (r, p) in row.iter_mut().zip(env.transition_row(s, a)) {
                        *r += pi.prob(s, a) * p;
                    }
                }
                row
            })
            .collect();
        // mean in the reference-offset form `P_1 + (1/n) sum_k (P_k - P_1)`,
        // so deterministic policies reproduce the library's floats exactly
        let inv = 1.0 / n as f64;
        let mean: Vec<f64> = (0..ns)
            .map(|sp| {
                let offset: f64 = rows[1..].iter().map(|r| r[sp] - rows[0][sp]).sum();
                rows[0][sp] + offset * inv
            })
            .collect();
        let total: f64 = rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&mean)
                    .map(|(p, m)| (p - m).abs())
                    .sum::<f64>()
            })
            .sum();
        worst = worst.max(total);
    }
    worst
}

/// Max of [`kappa1_at`] over all deterministic policies.
pub fn brute_force_kappa1(task: &FederatedTask) -> f64 {
    deterministic_policies(task.num_states(), task.num_actions())
        .map(|actions| {
            let pi = StochasticPolicy::deterministic(&actions, task.num_actions()).unwrap();
            kappa1_at(task, &pi)
        })
        .fold(0.0, f64::max)
}
