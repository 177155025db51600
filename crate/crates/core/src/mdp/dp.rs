use nalgebra::{DMatrix, DVector};

use super::{QTable, StateDistribution, StochasticPolicy, Table, TabularMdp, ValueVector};
use crate::error::{Error, Result};

/// Largest state count solved by a dense LU factorization; bigger models fall
/// back to fixed-point iteration.
const DIRECT_SOLVE_MAX_STATES: usize = 512;
const ITERATIVE_RESIDUAL: f64 = 1e-10;
const ITERATIVE_MAX_SWEEPS: usize = 1_000_000;

/// Bellman optimality operator:
/// `(TQ)(s,a) = R(s,a) + gamma * sum_s' P(s'|s,a) max_a' Q(s',a')`.
pub fn bellman_optimality(mdp: &TabularMdp, q: &Table) -> Table {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    debug_assert_eq!(q.shape(), (ns, na));
    let v: Vec<f64> = (0..ns)
        .map(|s| q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut out = Table::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let expected: f64 = mdp
                .transition_row(s, a)
                .iter()
                .zip(&v)
                .map(|(p, v)| p * v)
                .sum();
            out.set(s, a, mdp.reward(s, a) + mdp.gamma() * expected);
        }
    }
    out
}

/// Iterates the Bellman optimality operator from `Q = 0` until
/// `||TQ - Q||_inf <= tol`.
pub fn q_value_iteration(mdp: &TabularMdp, tol: f64, max_iter: usize) -> Result<QTable> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut q = Table::zeros(mdp.num_states(), mdp.num_actions());
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = bellman_optimality(mdp, &q);
        residual = next.sup_distance(&q);
        if residual <= tol {
            return Ok(QTable(q));
        }
        q = next;
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual,
    })
}

fn check_policy(mdp: &TabularMdp, policy: &StochasticPolicy) -> Result<()> {
    mdp.check_table(policy.table(), "policy")
}

/// `P^pi(s'|s)` as a dense matrix (row = current state).
fn policy_transition(mdp: &TabularMdp, policy: &StochasticPolicy) -> DMatrix<f64> {
    let ns = mdp.num_states();
    let mut p = DMatrix::zeros(ns, ns);
    for s in 0..ns {
        for a in 0..mdp.num_actions() {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for (sp, &prob) in mdp.transition_row(s, a).iter().enumerate() {
                p[(s, sp)] += w * prob;
            }
        }
    }
    p
}

fn policy_reward(mdp: &TabularMdp, policy: &StochasticPolicy) -> DVector<f64> {
    DVector::from_iterator(
        mdp.num_states(),
        (0..mdp.num_states()).map(|s| {
            (0..mdp.num_actions())
                .map(|a| policy.prob(s, a) * mdp.reward(s, a))
                .sum::<f64>()
        }),
    )
}

/// Solves `x = b + gamma * M x`.
fn solve_discounted(m: &DMatrix<f64>, b: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
    let n = b.len();
    if n <= DIRECT_SOLVE_MAX_STATES {
        let system = DMatrix::identity(n, n) - m * gamma;
        return system
            .lu()
            .solve(b)
            .ok_or_else(|| Error::InvalidMdp("singular evaluation system".into()));
    }
    let mut x = b.clone();
    for _ in 0..ITERATIVE_MAX_SWEEPS {
        let next = b + m * &x * gamma;
        let residual = (&next - &x).amax();
        x = next;
        if residual <= ITERATIVE_RESIDUAL {
            return Ok(x);
        }
    }
    Err(Error::NotConverged {
        iterations: ITERATIVE_MAX_SWEEPS,
        residual: (b + m * &x * gamma - &x).amax(),
    })
}

/// `V^pi`, the solution of `V = R^pi + gamma P^pi V`.
pub fn policy_evaluation(mdp: &TabularMdp, policy: &StochasticPolicy) -> Result<ValueVector> {
    check_policy(mdp, policy)?;
    let p = policy_transition(mdp, policy);
    let r = policy_reward(mdp, policy);
    let v = solve_discounted(&p, &r, mdp.gamma())?;
    Ok(ValueVector(v.iter().copied().collect()))
}

pub(crate) fn q_from_values(mdp: &TabularMdp, v: &[f64]) -> QTable {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut q = Table::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let expected: f64 = mdp
                .transition_row(s, a)
                .iter()
                .zip(v)
                .map(|(p, v)| p * v)
                .sum();
            q.set(s, a, mdp.reward(s, a) + mdp.gamma() * expected);
        }
    }
    QTable(q)
}

/// `Q^pi(s,a) = R(s,a) + gamma sum_s' P(s'|s,a) V^pi(s')`.
pub fn policy_q(mdp: &TabularMdp, policy: &StochasticPolicy) -> Result<QTable> {
    let v = policy_evaluation(mdp, policy)?;
    Ok(q_from_values(mdp, &v))
}

/// Normalized discounted state visitation
/// `d(s) = (1 - gamma) sum_t gamma^t Pr(s_t = s | s_0 ~ d0, pi)`.
pub fn discounted_occupancy(
    mdp: &TabularMdp,
    policy: &StochasticPolicy,
    d0: &StateDistribution,
) -> Result<StateDistribution> {
    check_policy(mdp, policy)?;
    mdp.check_distribution(d0)?;
    let gamma = mdp.gamma();
    let pt = policy_transition(mdp, policy).transpose();
    let b = DVector::from_iterator(d0.len(), d0.iter().map(|p| (1.0 - gamma) * p));
    let d = solve_discounted(&pt, &b, gamma)?;
    // clamp round-off negatives; the solve is exact up to O(eps)
    Ok(StateDistribution(d.iter().map(|x| x.max(0.0)).collect()))
}

/// Deterministic argmax policy; ties go to the lowest action index.
pub fn greedy_policy(q: &Table) -> StochasticPolicy {
    let actions: Vec<usize> = q
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (a, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    StochasticPolicy::deterministic(&actions, q.cols()).expect("argmax is in range")
}

/// `E_{s ~ d0}[V^pi(s)]`.
pub fn value_at(
    mdp: &TabularMdp,
    policy: &StochasticPolicy,
    d0: &StateDistribution,
) -> Result<f64> {
    mdp.check_distribution(d0)?;
    let v = policy_evaluation(mdp, policy)?;
    Ok(d0.iter().zip(v.iter()).map(|(p, v)| p * v).sum())
}
