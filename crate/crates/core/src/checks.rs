//! Numerical property suites. Each check runs a batch of seeded instances
//! and reports the worst slack `bound - measured` over all of them, so a
//! negative slack is a violation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::algo::{qavg_train, Algorithm, FedConfig, LocalUpdates};
use crate::env::{
    imaginary_mdp, kappa1, make_counterexample_task, make_random_task, random_interior_policy,
    FederatedTask, TransitionMode,
};
use crate::error::{Error, Result};
use crate::mdp::{
    bellman_optimality, exact_policy_gradient, policy_evaluation, softmax_gradient, softmax_policy,
    value_at, LogitTable, StateDistribution, StochasticPolicy, Table,
};
use crate::rng::{substream, tags, StreamRng};

/// Additive slack granted to exact inequalities.
pub const VALUE_TOL: f64 = 1e-9;
/// Central-difference step for gradient checks.
pub const FD_STEP: f64 = 1e-6;
/// Relative error allowed between exact gradients and finite differences.
pub const FD_REL_TOL: f64 = 1e-5;
/// Grid spacing of the initial-distribution search.
pub const GRID_STEP: f64 = 0.05;
/// Required gap between the two argmax `q` components.
pub const MIN_ARGMAX_SPLIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Smallest `bound - measured` over all cases.
    pub worst_slack: f64,
    pub cases: usize,
}

impl CheckResult {
    fn from_slacks(name: &str, slacks: impl IntoIterator<Item = f64>) -> Self {
        let (mut worst, mut cases) = (f64::INFINITY, 0);
        for s in slacks {
            // NaN slack counts as a failure
            worst = if s.is_nan() {
                f64::NEG_INFINITY
            } else {
                worst.min(s)
            };
            cases += 1;
        }
        CheckResult {
            name: name.to_string(),
            passed: cases > 0 && worst >= 0.0,
            worst_slack: worst,
            cases,
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<28} {}  worst slack {:+.3e}  ({} cases)",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.worst_slack,
            self.cases
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemmas,
    QavgBound,
    Counterexample,
    Gradients,
    All,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lemmas" => Ok(Suite::Lemmas),
            "qavg_bound" => Ok(Suite::QavgBound),
            "counterexample" => Ok(Suite::Counterexample),
            "gradients" => Ok(Suite::Gradients),
            "all" => Ok(Suite::All),
            other => Err(Error::invalid(format!(
                "unknown suite `{other}` (expected lemmas, qavg_bound, counterexample, gradients or all)"
            ))),
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Lemmas | Suite::All) {
        out.extend(lemma_checks(seed, 100)?);
        out.push(contraction_check(seed, 200)?);
    }
    if matches!(suite, Suite::QavgBound | Suite::All) {
        out.push(qavg_bound_check(seed, 20, 5000)?);
    }
    if matches!(suite, Suite::Counterexample | Suite::All) {
        out.push(counterexample_check()?);
    }
    if matches!(suite, Suite::Gradients | Suite::All) {
        out.extend(gradient_checks(seed, 50)?);
    }
    Ok(out)
}

/// Random task for case `index`: sizes, discount and transition mode vary
/// with the case so the suite covers more than one shape.
fn check_task(seed: u64, index: u64) -> Result<FederatedTask> {
    let mut rng = substream(seed, tags::CHECK_TASK, index);
    let n = rng.random_range(2..=5);
    let ns = rng.random_range(2..=8);
    let na = rng.random_range(2..=4);
    let gamma = [0.5, 0.8, 0.9, 0.95][rng.random_range(0..4)];
    let mode = if rng.random_bool(0.5) {
        TransitionMode::Dirichlet
    } else {
        TransitionMode::Bernoulli
    };
    make_random_task(rng.random(), n, ns, na, gamma, mode)
}

/// Mean of the per-environment value vectors and the value vector in the
/// averaged environment.
pub fn averaged_and_imaginary_values(
    task: &FederatedTask,
    policy: &StochasticPolicy,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut mean = vec![0.0; task.num_states()];
    for env in task.envs() {
        let v = policy_evaluation(env, policy)?;
        mean.iter_mut().zip(v.iter()).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= task.n() as f64);
    let v_i = policy_evaluation(&imaginary_mdp(task), policy)?;
    Ok((mean, v_i.0))
}

/// The averaged value dominates the value in the averaged environment, and
/// exceeds it by at most `gamma * kappa1 / (1 - gamma)^2`.
pub fn lemma_checks(seed: u64, num_cases: u64) -> Result<Vec<CheckResult>> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for i in 0..num_cases {
        let task = check_task(seed, i)?;
        let mut rng = substream(seed, tags::CHECK_POLICY, i);
        let policy = random_interior_policy(&mut rng, task.num_states(), task.num_actions());
        let (v_bar, v_i) = averaged_and_imaginary_values(&task, &policy)?;
        let gamma = task.gamma();
        let bound = gamma * kappa1(&task) / ((1.0 - gamma) * (1.0 - gamma));
        for (a, b) in v_bar.iter().zip(&v_i) {
            lower.push(a - b + VALUE_TOL);
            upper.push(bound + VALUE_TOL - (a - b).abs());
        }
    }
    Ok(vec![
        CheckResult::from_slacks("averaged_value_dominates", lower),
        CheckResult::from_slacks("heterogeneity_value_gap", upper),
    ])
}

/// `Q -> (1/n) sum_k T_k Q`.
pub fn average_bellman(task: &FederatedTask, q: &Table) -> Result<Table> {
    let images: Vec<Table> = task
        .envs()
        .iter()
        .map(|env| bellman_optimality(env, q))
        .collect();
    Table::mean(&images)
}

fn random_table(rng: &mut StreamRng, rows: usize, cols: usize, scale: f64) -> Table {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    Table::from_vec(rows, cols, data).expect("shape")
}

/// The averaged Bellman optimality operator is a `gamma`-contraction in sup
/// norm.
pub fn contraction_check(seed: u64, num_pairs: u64) -> Result<CheckResult> {
    let mut slacks = Vec::new();
    for i in 0..num_pairs {
        let task = check_task(seed, 10_000 + i)?;
        let mut rng = substream(seed, tags::CHECK_TABLE, i);
        let (ns, na) = (task.num_states(), task.num_actions());
        let q1 = random_table(&mut rng, ns, na, 10.0);
        let q2 = random_table(&mut rng, ns, na, 10.0);
        let before = q1.sup_distance(&q2);
        let after = average_bellman(&task, &q1)?.sup_distance(&average_bellman(&task, &q2)?);
        slacks.push(task.gamma() * before - after + 1e-12);
    }
    Ok(CheckResult::from_slacks(
        "average_bellman_contraction",
        slacks,
    ))
}

/// `16 gamma E / ((1 - gamma)^3 (t + E))`.
pub fn qavg_gap_bound(gamma: f64, e: u64, t: u64) -> f64 {
    16.0 * gamma * e as f64 / ((1.0 - gamma).powi(3) * (t + e) as f64)
}

/// QAvg with the theoretical step sizes from a zero table stays within
/// [`qavg_gap_bound`] of the averaged environment's optimum at every round.
pub fn qavg_bound_check(seed: u64, num_tasks: u64, total_iters: u64) -> Result<CheckResult> {
    let mut slacks = Vec::new();
    for i in 0..num_tasks {
        let task_seed: u64 = substream(seed, tags::CHECK_TASK, 20_000 + i).random();
        let task = make_random_task(task_seed, 5, 8, 4, 0.9, TransitionMode::Dirichlet)?;
        for e in [1, 2, 4, 8] {
            let cfg = FedConfig::new(Algorithm::Qavg, LocalUpdates::Every(e), total_iters)
                .with_record_every(1);
            let trace = qavg_train(&task, &cfg)?;
            for r in &trace.records {
                let gap = r.q_gap.expect("qavg records the gap");
                slacks.push(qavg_gap_bound(task.gamma(), e, r.iter) - gap);
            }
        }
    }
    Ok(CheckResult::from_slacks("qavg_gap_bound", slacks))
}

/// Policy `(p, q)` with `p = pi(a0|s0)` and `q = pi(a0|s1)`.
pub fn two_state_policy(p: f64, q: f64) -> StochasticPolicy {
    StochasticPolicy::from_rows(&[vec![p, 1.0 - p], vec![q, 1.0 - q]]).expect("valid rows")
}

/// Grid argmax `(p, q)` of the federated objective from `d0`; ties keep the
/// first grid point in row-major `(p, q)` order.
pub fn grid_argmax(
    task: &FederatedTask,
    d0: &StateDistribution,
    step: f64,
) -> Result<(f64, f64, f64)> {
    let k = (1.0 / step).round() as usize;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=k {
        for j in 0..=k {
            let (p, q) = (i as f64 / k as f64, j as f64 / k as f64);
            let value = task.objective_from(&two_state_policy(p, q), d0)?;
            if value > best.0 {
                best = (value, p, q);
            }
        }
    }
    Ok((best.1, best.2, best.0))
}

/// On the two-state task the best policy from `s0` and the best policy from
/// `s1` disagree on the action in `s1`.
pub fn counterexample_check() -> Result<CheckResult> {
    let mut slacks = Vec::new();
    for tau in [0.0, 0.01] {
        let task = make_counterexample_task(tau)?;
        let (_, q0, _) = grid_argmax(&task, &StateDistribution::point(2, 0), GRID_STEP)?;
        let (_, q1, _) = grid_argmax(&task, &StateDistribution::point(2, 1), GRID_STEP)?;
        slacks.push((q0 - q1).abs() - MIN_ARGMAX_SPLIT);
    }
    Ok(CheckResult::from_slacks(
        "initial_distribution_dependence",
        slacks,
    ))
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Random direction with zero row sums, scaled to unit sup norm.
fn tangent_direction(rng: &mut StreamRng, rows: usize, cols: usize) -> Table {
    let mut dir = random_table(rng, rows, cols, 1.0);
    for s in 0..rows {
        let row = dir.row_mut(s);
        let mean = row.iter().sum::<f64>() / cols as f64;
        row.iter_mut().for_each(|x| *x -= mean);
    }
    let scale = dir.sup_norm();
    dir.as_mut_slice().iter_mut().for_each(|x| *x /= scale);
    dir
}

fn shifted(base: &Table, dir: &Table, h: f64) -> Table {
    let mut out = base.clone();
    out.add_scaled(h, dir);
    out
}

fn inner(a: &Table, b: &Table) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x * y)
        .sum()
}

/// Exact policy and logit gradients against central differences along random
/// directions (simplex-tangent for the policy). Each case probes three
/// directions; the error is relative to the larger of the two directional
/// derivatives, floored at `1e-3` times the gradient's Euclidean norm.
pub fn gradient_checks(seed: u64, num_cases: u64) -> Result<Vec<CheckResult>> {
    let mut policy_slacks = Vec::new();
    let mut logit_slacks = Vec::new();
    for i in 0..num_cases {
        let mut rng = substream(seed, tags::CHECK_TABLE, 30_000 + i);
        let ns = rng.random_range(1..=6);
        let na = rng.random_range(2..=6);
        let mode = if i % 2 == 0 {
            TransitionMode::Dirichlet
        } else {
            TransitionMode::Bernoulli
        };
        let task = make_random_task(rng.random(), 1, ns, na, 0.9, mode)?;
        let mdp = task.env(0);
        let d0 = task.d0();

        // keep every entry at least 0.1 / na so the FD probes stay inside
        let raw = random_interior_policy(&mut rng, ns, na);
        let mut table = raw.into_table();
        table
            .as_mut_slice()
            .iter_mut()
            .for_each(|x| *x = 0.9 * *x + 0.1 / na as f64);
        let policy = StochasticPolicy::new(table)?;
        let grad = exact_policy_gradient(mdp, &policy, d0)?;
        let floor = 1e-3 * grad.l2_norm();
        for _ in 0..3 {
            let dir = tangent_direction(&mut rng, ns, na);
            let plus = StochasticPolicy::new(shifted(policy.table(), &dir, FD_STEP))?;
            let minus = StochasticPolicy::new(shifted(policy.table(), &dir, -FD_STEP))?;
            let fd = (value_at(mdp, &plus, d0)? - value_at(mdp, &minus, d0)?) / (2.0 * FD_STEP);
            policy_slacks.push(FD_REL_TOL - relative_error(inner(&grad, &dir), fd, floor));
        }

        let logits = LogitTable(random_table(&mut rng, ns, na, 2.0));
        let grad = softmax_gradient(mdp, &logits, d0)?;
        let floor = 1e-3 * grad.l2_norm();
        for _ in 0..3 {
            let dir = random_table(&mut rng, ns, na, 1.0);
            let value = |h: f64| {
                value_at(
                    mdp,
                    &softmax_policy(&LogitTable(shifted(&logits, &dir, h))),
                    d0,
                )
            };
            let fd = (value(FD_STEP)? - value(-FD_STEP)?) / (2.0 * FD_STEP);
            logit_slacks.push(FD_REL_TOL - relative_error(inner(&grad, &dir), fd, floor));
        }
    }
    Ok(vec![
        CheckResult::from_slacks("policy_gradient_fd", policy_slacks),
        CheckResult::from_slacks("softmax_gradient_fd", logit_slacks),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::FederatedTask;
    use crate::mdp::TabularMdp;

    #[test]
    fn slack_bookkeeping() {
        let r = CheckResult::from_slacks("x", [0.5, 0.1, 2.0]);
        assert!(r.passed);
        assert_eq!(r.worst_slack, 0.1);
        assert_eq!(r.cases, 3);
        assert!(!CheckResult::from_slacks("x", [0.5, -1e-15]).passed);
        assert!(!CheckResult::from_slacks("x", [0.5, f64::NAN]).passed);
        assert!(!CheckResult::from_slacks("x", []).passed);
    }

    #[test]
    fn identical_envs_have_no_value_gap() {
        let mdp = crate::env::make_random_mdp(4, 5, 3, TransitionMode::Dirichlet, 0.9).unwrap();
        let task = FederatedTask::new(vec![mdp; 3], StateDistribution::uniform(5)).unwrap();
        assert_eq!(kappa1(&task), 0.0);
        let pi = StochasticPolicy::uniform(5, 3);
        let (v_bar, v_i) = averaged_and_imaginary_values(&task, &pi).unwrap();
        for (a, b) in v_bar.iter().zip(&v_i) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn bound_formula() {
        // 16 * 0.9 * 1 / (0.001 * 1)
        assert!((qavg_gap_bound(0.9, 1, 0) - 14_400.0).abs() < 1e-6);
        assert!((qavg_gap_bound(0.9, 4, 4) - 7_200.0).abs() < 1e-6);
    }

    #[test]
    fn grid_search_prefers_the_big_reward() {
        // one state, two actions, reward only for a0: p = 1 is best
        let mdp = TabularMdp::new(
            2,
            2,
            vec![1.0, 0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
            0.5,
        )
        .unwrap();
        let task = FederatedTask::new(vec![mdp], StateDistribution::point(2, 0)).unwrap();
        let (p, _, v) = grid_argmax(&task, task.d0(), 0.25).unwrap();
        assert_eq!(p, 1.0);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn leak_free_counterexample_splits_on_the_s1_action() {
        let task = make_counterexample_task(0.0).unwrap();
        let from_s0 = grid_argmax(&task, &StateDistribution::point(2, 0), GRID_STEP).unwrap();
        let from_s1 = grid_argmax(&task, &StateDistribution::point(2, 1), GRID_STEP).unwrap();
        assert_eq!((from_s0.0, from_s0.1), (0.0, 1.0));
        assert_eq!((from_s1.0, from_s1.1), (0.0, 0.0));
        // (982 + 10000) / 2 and (-20 + 8998) / 2
        assert!((from_s0.2 - 5500.0).abs() < 1e-9);
        assert!((from_s1.2 - 4489.0).abs() < 1e-9);

        // a small leak keeps the split; a leak of 0.01 already erases it
        let task = make_counterexample_task(1e-4).unwrap();
        let from_s0 = grid_argmax(&task, &StateDistribution::point(2, 0), GRID_STEP).unwrap();
        assert!(from_s0.1 >= 0.5);
        let task = make_counterexample_task(0.01).unwrap();
        let from_s0 = grid_argmax(&task, &StateDistribution::point(2, 0), GRID_STEP).unwrap();
        assert_eq!(from_s0.1, 0.0);
    }

    #[test]
    fn suite_names() {
        assert_eq!("qavg_bound".parse::<Suite>().unwrap(), Suite::QavgBound);
        assert!("lemma".parse::<Suite>().is_err());
    }

    #[test]
    fn averaged_value_can_fall_below_imaginary_value() {
        // one action; env 1 swaps the two states, env 2 stays put; only s1 pays
        let swap = TabularMdp::new(2, 1, vec![0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0], 0.9).unwrap();
        let stay = TabularMdp::new(2, 1, vec![0.0, 1.0], vec![1.0, 0.0, 0.0, 1.0], 0.9).unwrap();
        let task = FederatedTask::new(vec![swap, stay], StateDistribution::point(2, 0)).unwrap();
        let pi = StochasticPolicy::uniform(2, 1);
        let (v_bar, v_i) = averaged_and_imaginary_values(&task, &pi).unwrap();
        // swap: 0.9 / (1 - 0.81); stay: 0; averaged env: 0.9 / (2 * 0.1)
        assert!((v_bar[0] - 0.45 / 0.19).abs() < 1e-12);
        assert!((v_i[0] - 4.5).abs() < 1e-12);
        assert!(v_bar[0] < v_i[0]);
        // the kappa1 bound still holds: 0.9 * 2 / 0.01 = 180
        assert!((v_bar[0] - v_i[0]).abs() <= 0.9 * kappa1(&task) / 0.01);
    }

    #[test]
    fn quick_suites_pass() {
        let lemmas = lemma_checks(3, 10).unwrap();
        assert!(lemmas[1].passed, "{}", lemmas[1]);
        assert!(contraction_check(3, 20).unwrap().passed);
        for r in gradient_checks(3, 10).unwrap() {
            assert!(r.passed, "{r}");
        }
    }
}
