use super::dp::{discounted_occupancy, policy_evaluation, q_from_values};
use super::{LogitTable, StateDistribution, StochasticPolicy, Table, TabularMdp};
use crate::error::Result;

/// Gradient of `E_{d0}[V^pi]` with respect to the direct parameters
/// `pi(a|s)`: `d_{pi,d0}(s) * Q^pi(s,a) / (1 - gamma)`.
pub fn exact_policy_gradient(
    mdp: &TabularMdp,
    policy: &StochasticPolicy,
    d0: &StateDistribution,
) -> Result<Table> {
    let v = policy_evaluation(mdp, policy)?;
    let q = q_from_values(mdp, &v);
    let d = discounted_occupancy(mdp, policy, d0)?;
    let scale = 1.0 / (1.0 - mdp.gamma());
    let mut grad = q.into_table();
    for s in 0..grad.rows() {
        let w = scale * d[s];
        grad.row_mut(s).iter_mut().for_each(|x| *x *= w);
    }
    Ok(grad)
}

/// Row-wise softmax, computed after subtracting each row's maximum.
pub fn softmax_policy(logits: &LogitTable) -> StochasticPolicy {
    let mut probs = logits.0.clone();
    for s in 0..probs.rows() {
        let row = probs.row_mut(s);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        row.iter_mut().for_each(|x| *x /= total);
    }
    StochasticPolicy::new(probs).expect("softmax rows are on the simplex")
}

/// Gradient of `E_{d0}[V^pi]` with respect to softmax logits:
/// `d(s) * pi(a|s) * (Q^pi(s,a) - V^pi(s)) / (1 - gamma)`.
pub fn softmax_gradient(
    mdp: &TabularMdp,
    logits: &LogitTable,
    d0: &StateDistribution,
) -> Result<Table> {
    mdp.check_table(logits, "logit table")?;
    let policy = softmax_policy(logits);
    let v = policy_evaluation(mdp, &policy)?;
    let q = q_from_values(mdp, &v);
    let d = discounted_occupancy(mdp, &policy, d0)?;
    let scale = 1.0 / (1.0 - mdp.gamma());
    let mut grad = Table::zeros(mdp.num_states(), mdp.num_actions());
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            let adv = q.get(s, a) - v[s];
            grad.set(s, a, scale * d[s] * policy.prob(s, a) * adv);
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::policy_q;

    fn logits(rows: &[Vec<f64>]) -> LogitTable {
        LogitTable(Table::from_rows(rows).unwrap())
    }

    #[test]
    fn softmax_hand_values() {
        let pi = softmax_policy(&logits(&[vec![0.0, 0.0], vec![2.0f64.ln(), 0.0]]));
        assert!((pi.prob(0, 0) - 0.5).abs() < 1e-15);
        assert!((pi.prob(1, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((pi.prob(1, 1) - 1.0 / 3.0).abs() < 1e-15);

        let pi = softmax_policy(&logits(&[vec![4.0, 4.0, 4.0]]));
        for a in 0..3 {
            assert!((pi.prob(0, a) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_survives_huge_logits_and_shifts() {
        let base = softmax_policy(&logits(&[vec![1.0, 2.0, 3.0]]));
        let shifted = softmax_policy(&logits(&[vec![1001.0, 1002.0, 1003.0]]));
        for a in 0..3 {
            assert!((base.prob(0, a) - shifted.prob(0, a)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_state_gradient_is_scaled_q() {
        let mdp = TabularMdp::new(1, 2, vec![2.0, 5.0], vec![1.0, 1.0], 0.5).unwrap();
        let pi = StochasticPolicy::from_rows(&[vec![0.3, 0.7]]).unwrap();
        let d0 = StateDistribution::uniform(1);
        let g = exact_policy_gradient(&mdp, &pi, &d0).unwrap();
        let q = policy_q(&mdp, &pi).unwrap();
        for a in 0..2 {
            assert!((g.get(0, a) - q.get(0, a) / 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rewards_zero_gradients() {
        let mdp = TabularMdp::new(2, 2, vec![0.0; 4], vec![0.5; 8], 0.9).unwrap();
        let d0 = StateDistribution::uniform(2);
        let g = exact_policy_gradient(&mdp, &StochasticPolicy::uniform(2, 2), &d0).unwrap();
        assert!(g.as_slice().iter().all(|x| *x == 0.0));
        let g = softmax_gradient(&mdp, &LogitTable::zeros(2, 2), &d0).unwrap();
        assert!(g.as_slice().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn softmax_gradient_rows_sum_to_zero() {
        let mdp = TabularMdp::new(
            2,
            3,
            vec![0.1, 0.9, 0.4, 0.3, 0.2, 0.8],
            vec![
                0.2, 0.8, 0.5, 0.5, 1.0, 0.0, //
                0.3, 0.7, 0.0, 1.0, 0.6, 0.4,
            ],
            0.8,
        )
        .unwrap();
        let th = logits(&[vec![0.3, -1.0, 2.0], vec![0.0, 0.5, -0.2]]);
        let g = softmax_gradient(&mdp, &th, &StateDistribution::uniform(2)).unwrap();
        for s in 0..2 {
            assert!(g.row(s).iter().sum::<f64>().abs() < 1e-9);
        }
    }
}
