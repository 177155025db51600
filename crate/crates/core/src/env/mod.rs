//! Federated tasks: `n` environments sharing states, actions, rewards and
//! discount, with heterogeneous transitions and a common initial
//! distribution.

mod counterexample;
mod random;
mod windy;

pub(crate) use windy::wind_draws;

pub use counterexample::make_counterexample_task;
pub use random::{
    make_random_mdp, make_random_task, random_rewards, random_transitions, TransitionMode,
};
pub use windy::{
    make_windy_cliff, make_windy_cliff_task, wind_intensities, WindyCliffLayout,
    WINDY_CLIFF_ACTIONS, WINDY_CLIFF_STATES,
};

use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::mdp::{
    exact_policy_gradient, value_at, StateDistribution, StochasticPolicy, Table, TabularMdp,
};
use crate::rng::{substream, tags, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedTask {
    envs: Vec<TabularMdp>,
    d0: StateDistribution,
}

impl FederatedTask {
    pub fn new(envs: Vec<TabularMdp>, d0: StateDistribution) -> Result<Self> {
        let first = envs
            .first()
            .ok_or_else(|| Error::invalid("a federated task needs at least one environment"))?;
        for (k, env) in envs.iter().enumerate().skip(1) {
            if !env.same_shape(first) {
                return Err(Error::shape(format!(
                    "environment {k} is {}x{}, environment 0 is {}x{}",
                    env.num_states(),
                    env.num_actions(),
                    first.num_states(),
                    first.num_actions()
                )));
            }
            if env.gamma().to_bits() != first.gamma().to_bits() {
                return Err(Error::invalid(format!(
                    "environment {k} has a different discount"
                )));
            }
            if env.rewards() != first.rewards() {
                return Err(Error::invalid(format!(
                    "environment {k} has a different reward table"
                )));
            }
        }
        first.check_distribution(&d0)?;
        Ok(FederatedTask { envs, d0 })
    }

    pub fn with_d0(&self, d0: StateDistribution) -> Result<Self> {
        Self::new(self.envs.clone(), d0)
    }

    pub fn n(&self) -> usize {
        self.envs.len()
    }

    pub fn envs(&self) -> &[TabularMdp] {
        &self.envs
    }

    pub fn env(&self, k: usize) -> &TabularMdp {
        &self.envs[k]
    }

    pub fn d0(&self) -> &StateDistribution {
        &self.d0
    }

    pub fn num_states(&self) -> usize {
        self.envs[0].num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.envs[0].num_actions()
    }

    pub fn gamma(&self) -> f64 {
        self.envs[0].gamma()
    }

    /// Federated objective: `(1/n) sum_k E_{d0}[V_k^pi]`.
    pub fn objective(&self, policy: &StochasticPolicy) -> Result<f64> {
        self.objective_from(policy, &self.d0)
    }

    pub fn objective_from(&self, policy: &StochasticPolicy, d0: &StateDistribution) -> Result<f64> {
        let mut total = 0.0;
        for env in &self.envs {
            total += value_at(env, policy, d0)?;
        }
        Ok(total / self.n() as f64)
    }
}

/// Environment heterogeneity measured on one task.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityReport {
    pub kappa1: f64,
    /// Sampled lower bound on kappa2.
    pub kappa2_estimate: f64,
    pub num_policy_samples: usize,
    pub seed: u64,
}

pub fn heterogeneity(
    task: &FederatedTask,
    num_samples: usize,
    seed: u64,
) -> Result<HeterogeneityReport> {
    Ok(HeterogeneityReport {
        kappa1: kappa1(task),
        kappa2_estimate: kappa2_estimate(task, num_samples, seed)?,
        num_policy_samples: num_samples,
        seed,
    })
}

/// Environment `k` gets transitions `kappa * P_k + (1 - kappa) * P_0`.
pub fn interpolate_task(
    base: &TabularMdp,
    noises: &[TabularMdp],
    kappa: f64,
    d0: StateDistribution,
) -> Result<FederatedTask> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::invalid(format!(
            "kappa must lie in [0, 1], got {kappa}"
        )));
    }
    let envs = noises
        .iter()
        .enumerate()
        .map(|(k, noise)| {
            if !noise.same_shape(base) {
                return Err(Error::shape(format!(
                    "noise environment {k} has a different shape"
                )));
            }
            if noise.rewards() != base.rewards()
                || noise.gamma().to_bits() != base.gamma().to_bits()
            {
                return Err(Error::invalid(format!(
                    "noise environment {k} differs from the base in rewards or discount"
                )));
            }
            let mixed = base
                .transitions()
                .iter()
                .zip(noise.transitions())
                .map(|(p0, pk)| kappa * pk + (1.0 - kappa) * p0)
                .collect();
            base.with_transitions(mixed)
        })
        .collect::<Result<Vec<_>>>()?;
    FederatedTask::new(envs, d0)
}

/// The averaged environment `<S, A, R, mean_k P_k, gamma>`.
pub fn imaginary_mdp(task: &FederatedTask) -> TabularMdp {
    let first = task.env(0);
    if task.n() == 1 {
        return first.clone();
    }
    // P_0 + mean_k (P_k - P_0): exact whenever the environments agree
    let base = first.transitions();
    let mut offset = vec![0.0; base.len()];
    for env in &task.envs()[1..] {
        for ((o, p), b) in offset.iter_mut().zip(env.transitions()).zip(base) {
            *o += p - b;
        }
    }
    let inv = 1.0 / task.n() as f64;
    let mean = base.iter().zip(&offset).map(|(b, o)| b + o * inv).collect();
    first
        .with_transitions(mean)
        .expect("averages of valid transition rows are valid")
}

/// Per-`(s, a)` deviation `sum_i sum_s' |P_i(s'|s,a) - Pbar(s'|s,a)|`,
/// laid out as a `|S| x |A|` table.
pub fn transition_deviation(task: &FederatedTask) -> Table {
    let avg = imaginary_mdp(task);
    let (ns, na) = (task.num_states(), task.num_actions());
    let mut out = Table::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let mean = avg.transition_row(s, a);
            let dev: f64 = task
                .envs()
                .iter()
                .map(|env| {
                    env.transition_row(s, a)
                        .iter()
                        .zip(mean)
                        .map(|(p, m)| (p - m).abs())
                        .sum::<f64>()
                })
                .sum();
            out.set(s, a, dev);
        }
    }
    out
}

/// kappa1: the maximum over states and policies of the summed L1 deviation
/// of `P_i^pi(.|s)` from the mean. For a fixed state the deviation is convex
/// in `pi(.|s)`, so the maximum sits at a simplex vertex and reduces to a max
/// over `(s, a)`.
pub fn kappa1(task: &FederatedTask) -> f64 {
    transition_deviation(task)
        .as_slice()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Row-wise Dirichlet(1, ..., 1) policy, i.e. uniform on each simplex row.
pub fn random_interior_policy(
    rng: &mut StreamRng,
    num_states: usize,
    num_actions: usize,
) -> StochasticPolicy {
    let mut table = Table::zeros(num_states, num_actions);
    for s in 0..num_states {
        let row = table.row_mut(s);
        let mut total = 0.0;
        for x in row.iter_mut() {
            let e: f64 = Exp1.sample(rng);
            // Exp1 can return exactly 0 with negligible probability
            *x = e.max(f64::MIN_POSITIVE);
            total += *x;
        }
        row.iter_mut().for_each(|x| *x /= total);
    }
    StochasticPolicy::new(table).expect("normalized rows")
}

/// `(1/n) sum_i ||grad g_i(pi) - mean_j grad g_j(pi)||_2` at one policy.
pub fn gradient_dispersion(task: &FederatedTask, policy: &StochasticPolicy) -> Result<f64> {
    let grads = task
        .envs()
        .iter()
        .map(|env| exact_policy_gradient(env, policy, task.d0()))
        .collect::<Result<Vec<_>>>()?;
    let mean = Table::mean(grads.iter())?;
    let total: f64 = grads
        .iter()
        .map(|g| {
            g.as_slice()
                .iter()
                .zip(mean.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / task.n() as f64)
}

/// Lower-bound estimate of kappa2: the largest gradient dispersion over
/// `num_samples` random interior policies. Sample `m` is drawn from its own
/// substream, so the sample sets for growing `num_samples` are nested.
pub fn kappa2_estimate(task: &FederatedTask, num_samples: usize, seed: u64) -> Result<f64> {
    if num_samples == 0 {
        return Err(Error::invalid(
            "kappa2 estimate needs at least one policy sample",
        ));
    }
    let mut best = 0.0_f64;
    for m in 0..num_samples {
        let mut rng = substream(seed, tags::KAPPA2_POLICY, m as u64);
        let policy = random_interior_policy(&mut rng, task.num_states(), task.num_actions());
        best = best.max(gradient_dispersion(task, &policy)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det_env(successors: &[usize], num_states: usize, num_actions: usize) -> TabularMdp {
        let mut p = vec![0.0; successors.len() * num_states];
        for (row, &sp) in successors.iter().enumerate() {
            p[row * num_states + sp] = 1.0;
        }
        TabularMdp::new(
            num_states,
            num_actions,
            vec![0.5; num_states * num_actions],
            p,
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn disjoint_successors_give_kappa1_two() {
        // only (s0, a0) differs: env0 -> s0, env1 -> s1
        let e0 = det_env(&[0, 1, 1, 1], 2, 2);
        let e1 = det_env(&[1, 1, 1, 1], 2, 2);
        let task = FederatedTask::new(vec![e0, e1], StateDistribution::uniform(2)).unwrap();
        assert!((kappa1(&task) - 2.0).abs() < 1e-15);
        let avg = imaginary_mdp(&task);
        assert_eq!(avg.transition_row(0, 0), &[0.5, 0.5]);
    }

    #[test]
    fn identical_envs_have_zero_heterogeneity() {
        let e = make_random_mdp(4, 3, 2, TransitionMode::Dirichlet, 0.9).unwrap();
        let task = FederatedTask::new(
            vec![e.clone(), e.clone(), e.clone()],
            StateDistribution::uniform(3),
        )
        .unwrap();
        assert_eq!(kappa1(&task), 0.0);
        assert_eq!(kappa2_estimate(&task, 5, 1).unwrap(), 0.0);
        assert_eq!(imaginary_mdp(&task), e);
        assert!(kappa2_estimate(&task, 0, 1).is_err());
    }

    #[test]
    fn task_rejects_mismatched_rewards() {
        let a = make_random_mdp(1, 2, 2, TransitionMode::Dirichlet, 0.9).unwrap();
        let b = make_random_mdp(2, 2, 2, TransitionMode::Dirichlet, 0.9).unwrap();
        assert!(FederatedTask::new(vec![a, b], StateDistribution::uniform(2)).is_err());
        assert!(FederatedTask::new(vec![], StateDistribution::uniform(2)).is_err());
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let e0 = det_env(&[0, 1, 0, 1], 2, 2);
        let e1 = det_env(&[1, 0, 1, 0], 2, 2);
        let d0 = StateDistribution::uniform(2);
        let t0 = interpolate_task(&e0, std::slice::from_ref(&e1), 0.0, d0.clone()).unwrap();
        assert_eq!(t0.env(0).transitions(), e0.transitions());
        let t1 = interpolate_task(&e0, std::slice::from_ref(&e1), 1.0, d0.clone()).unwrap();
        assert_eq!(t1.env(0).transitions(), e1.transitions());
        let half = interpolate_task(&e0, std::slice::from_ref(&e1), 0.5, d0.clone()).unwrap();
        assert!(half.env(0).transitions().iter().all(|p| *p == 0.5));
        assert!(interpolate_task(&e0, &[e1], 1.5, d0).is_err());
    }

    #[test]
    fn kappa2_is_monotone_in_sample_count() {
        let task = make_random_task(9, 3, 4, 3, 0.9, TransitionMode::Dirichlet).unwrap();
        let mut last = 0.0;
        for m in 1..8 {
            let k = kappa2_estimate(&task, m, 42).unwrap();
            assert!(k >= last);
            last = k;
        }
        let report = heterogeneity(&task, 4, 42).unwrap();
        assert!(report.kappa1 > 0.0 && report.kappa1 <= 2.0 * task.n() as f64);
        assert_eq!(report.num_policy_samples, 4);
    }
}
