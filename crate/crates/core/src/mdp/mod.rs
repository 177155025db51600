//! Dense tabular MDPs and the exact single-environment computations built on
//! them: optimal values, policy evaluation, occupancy measures, exact policy
//! gradients, softmax parameterization and simplex projection.
//!
//! Value functions count the first reward undiscounted:
//! `V(s) = E[sum_{t>=0} gamma^t R(s_t, a_t) | s_0 = s]`.

mod dp;
mod gradient;
mod simplex;

pub use dp::{
    bellman_optimality, discounted_occupancy, greedy_policy, policy_evaluation, policy_q,
    q_value_iteration, value_at,
};
pub use gradient::{exact_policy_gradient, softmax_gradient, softmax_policy};
pub use simplex::{project_row_to_simplex, project_rows_to_simplex};

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Tolerance on row sums of probability tables.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Slack allowed on individual probabilities outside `[0, 1]` (float rounding
/// of convex combinations).
const ENTRY_TOL: f64 = 1e-12;

/// Dense row-major `rows x cols` table of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Table {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "expected {rows}x{cols} = {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Table { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `max |self - other|` over all entries.
    pub fn sup_distance(&self, other: &Table) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, scale: f64, other: &Table) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    /// Entrywise mean, accumulated in iteration order as
    /// `first + (1/n) sum_k (t_k - first)`, which is exact when all tables
    /// agree.
    pub fn mean<'a>(tables: impl IntoIterator<Item = &'a Table>) -> Result<Table> {
        let mut iter = tables.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::invalid("mean of zero tables"))?;
        let mut offset = vec![0.0; first.data.len()];
        let mut count = 1usize;
        for t in iter {
            if t.shape() != first.shape() {
                return Err(Error::shape(format!(
                    "cannot average {:?} with {:?}",
                    first.shape(),
                    t.shape()
                )));
            }
            for ((o, x), f) in offset.iter_mut().zip(&t.data).zip(&first.data) {
                *o += x - f;
            }
            count += 1;
        }
        let inv = 1.0 / count as f64;
        let data = first
            .data
            .iter()
            .zip(&offset)
            .map(|(f, o)| f + o * inv)
            .collect();
        Ok(Table {
            rows: first.rows,
            cols: first.cols,
            data,
        })
    }
}

macro_rules! table_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(pub Table);

        impl $name {
            pub fn zeros(num_states: usize, num_actions: usize) -> Self {
                $name(Table::zeros(num_states, num_actions))
            }

            pub fn into_table(self) -> Table {
                self.0
            }
        }

        impl Deref for $name {
            type Target = Table;
            fn deref(&self) -> &Table {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut Table {
                &mut self.0
            }
        }
    };
}

table_newtype!(
    /// Action-value table `Q(s, a)`.
    QTable
);
table_newtype!(
    /// Softmax parameters `theta(s, a)`.
    LogitTable
);

/// One environment: shared-shape reward and transition tables plus discount.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    /// `reward[s * A + a]`
    reward: Vec<f64>,
    /// `transition[(s * A + a) * S + s']`
    transition: Vec<f64>,
    gamma: f64,
}

impl TabularMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        reward: Vec<f64>,
        transition: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp(format!(
                "need at least one state and one action, got {num_states}x{num_actions}"
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!(
                "gamma must lie in [0, 1), got {gamma}"
            )));
        }
        let sa = num_states * num_actions;
        if reward.len() != sa {
            return Err(Error::InvalidMdp(format!(
                "reward table has {} entries, expected {sa}",
                reward.len()
            )));
        }
        if transition.len() != sa * num_states {
            return Err(Error::InvalidMdp(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                sa * num_states
            )));
        }
        if let Some(i) = reward.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp(format!("non-finite reward at index {i}")));
        }
        for (row_idx, row) in transition.chunks_exact(num_states).enumerate() {
            let (s, a) = (row_idx / num_actions, row_idx % num_actions);
            if let Some(p) = row
                .iter()
                .find(|&&p| !(-ENTRY_TOL..=1.0 + ENTRY_TOL).contains(&p))
            {
                return Err(Error::InvalidMdp(format!(
                    "transition P(.|{s},{a}) has entry {p} outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidMdp(format!(
                    "transition P(.|{s},{a}) sums to {sum}"
                )));
            }
        }
        Ok(TabularMdp {
            num_states,
            num_actions,
            reward,
            transition,
            gamma,
        })
    }

    /// Same rewards and discount, different dynamics.
    pub fn with_transitions(&self, transition: Vec<f64>) -> Result<Self> {
        Self::new(
            self.num_states,
            self.num_actions,
            self.reward.clone(),
            transition,
            self.gamma,
        )
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    /// `P(. | s, a)`
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    pub fn same_shape(&self, other: &TabularMdp) -> bool {
        self.num_states == other.num_states && self.num_actions == other.num_actions
    }

    pub(crate) fn check_table(&self, table: &Table, what: &str) -> Result<()> {
        if table.shape() != (self.num_states, self.num_actions) {
            return Err(Error::shape(format!(
                "{what} is {:?}, MDP is {}x{}",
                table.shape(),
                self.num_states,
                self.num_actions
            )));
        }
        Ok(())
    }

    pub(crate) fn check_distribution(&self, d: &StateDistribution) -> Result<()> {
        if d.len() != self.num_states {
            return Err(Error::shape(format!(
                "state distribution has {} entries, MDP has {} states",
                d.len(),
                self.num_states
            )));
        }
        Ok(())
    }
}

/// Row-stochastic policy table `pi(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy(Table);

impl StochasticPolicy {
    pub fn new(table: Table) -> Result<Self> {
        for (s, row) in table.row_iter().enumerate() {
            if row
                .iter()
                .any(|&p| !(-ENTRY_TOL..=1.0 + ENTRY_TOL).contains(&p))
            {
                return Err(Error::invalid(format!(
                    "policy row {s} has an entry outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::invalid(format!("policy row {s} sums to {sum}")));
            }
        }
        if table.cols() == 0 {
            return Err(Error::invalid("policy needs at least one action"));
        }
        Ok(StochasticPolicy(table))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Table::from_rows(rows)?)
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        StochasticPolicy(Table::filled(
            num_states,
            num_actions,
            1.0 / num_actions as f64,
        ))
    }

    /// Deterministic policy taking `actions[s]` in state `s`.
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let mut table = Table::zeros(actions.len(), num_actions);
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::invalid(format!(
                    "action {a} out of range for {num_actions} actions"
                )));
            }
            table.set(s, a, 1.0);
        }
        Ok(StochasticPolicy(table))
    }

    /// Entrywise average of policies; rows stay on the simplex.
    pub fn average<'a>(policies: impl IntoIterator<Item = &'a StochasticPolicy>) -> Result<Self> {
        Self::new(Table::mean(policies.into_iter().map(|p| &p.0))?)
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.0.get(s, a)
    }

    pub fn row(&self, s: usize) -> &[f64] {
        self.0.row(s)
    }

    pub fn table(&self) -> &Table {
        &self.0
    }

    pub fn into_table(self) -> Table {
        self.0
    }

    pub fn num_states(&self) -> usize {
        self.0.rows()
    }

    pub fn num_actions(&self) -> usize {
        self.0.cols()
    }
}

/// Per-state values `V(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector(pub Vec<f64>);

impl Deref for ValueVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Probability vector over states (initial distributions, occupancies).
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution(Vec<f64>);

impl StateDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("empty state distribution"));
        }
        if probs
            .iter()
            .any(|&p| !(-ENTRY_TOL..=1.0 + ENTRY_TOL).contains(&p))
        {
            return Err(Error::invalid("state distribution entry outside [0, 1]"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("state distribution sums to {sum}")));
        }
        Ok(StateDistribution(probs))
    }

    pub fn uniform(num_states: usize) -> Self {
        StateDistribution(vec![1.0 / num_states as f64; num_states])
    }

    pub fn point(num_states: usize, state: usize) -> Self {
        let mut probs = vec![0.0; num_states];
        probs[state] = 1.0;
        StateDistribution(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for StateDistribution {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rows() {
        let err = TabularMdp::new(2, 1, vec![0.0, 0.0], vec![0.5, 0.4, 0.0, 1.0], 0.9);
        assert!(matches!(err, Err(Error::InvalidMdp(_))));
        let err = TabularMdp::new(1, 1, vec![0.0], vec![1.0], 1.0);
        assert!(matches!(err, Err(Error::InvalidMdp(_))));
        let err = TabularMdp::new(1, 1, vec![0.0, 1.0], vec![1.0], 0.5);
        assert!(matches!(err, Err(Error::InvalidMdp(_))));
        let err = TabularMdp::new(2, 1, vec![0.0, 0.0], vec![1.5, -0.5, 0.0, 1.0], 0.5);
        assert!(matches!(err, Err(Error::InvalidMdp(_))));
    }

    #[test]
    fn table_mean_is_entrywise() {
        let a = Table::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Table::from_rows(&[vec![3.0, 6.0]]).unwrap();
        assert_eq!(Table::mean([&a, &b]).unwrap().as_slice(), &[2.0, 4.0]);
        assert!(Table::mean(std::iter::empty::<&Table>()).is_err());
    }

    #[test]
    fn averaged_policies_stay_on_simplex() {
        let p = StochasticPolicy::deterministic(&[0, 1], 3).unwrap();
        let q = StochasticPolicy::uniform(2, 3);
        let avg = StochasticPolicy::average([&p, &q]).unwrap();
        for s in 0..2 {
            assert!((avg.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
