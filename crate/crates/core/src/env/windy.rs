use rand::Rng;

use super::FederatedTask;
use crate::error::{Error, Result};
use crate::mdp::{StateDistribution, TabularMdp};
use crate::rng::{substream, tags};

/// 4x4 cliff-walking grid with a northern wind.
///
/// Cells are numbered row-major from the top-left; the bottom row holds the
/// start (left), two cliff cells and the goal (right). State 16 is an
/// absorbing zero-reward sink entered after reaching the goal or a cliff.
pub struct WindyCliffLayout;

impl WindyCliffLayout {
    pub const ROWS: usize = 4;
    pub const COLS: usize = 4;
    pub const START: usize = 12;
    pub const CLIFF: [usize; 2] = [13, 14];
    pub const GOAL: usize = 15;
    pub const ABSORBING: usize = 16;

    pub const UP: usize = 0;
    pub const DOWN: usize = 1;
    pub const LEFT: usize = 2;
    pub const RIGHT: usize = 3;

    pub const GOAL_REWARD: f64 = 100.0;
    pub const CLIFF_REWARD: f64 = -100.0;

    /// Intended successor cell, clamped to the grid.
    pub fn step(cell: usize, action: usize) -> usize {
        let (r, c) = (cell / Self::COLS, cell % Self::COLS);
        let (r, c) = match action {
            Self::UP => (r.saturating_sub(1), c),
            Self::DOWN => ((r + 1).min(Self::ROWS - 1), c),
            Self::LEFT => (r, c.saturating_sub(1)),
            Self::RIGHT => (r, (c + 1).min(Self::COLS - 1)),
            _ => unreachable!("four actions"),
        };
        r * Self::COLS + c
    }

    fn is_terminal_cell(cell: usize) -> bool {
        cell == Self::GOAL || Self::CLIFF.contains(&cell)
    }
}

pub const WINDY_CLIFF_STATES: usize = WindyCliffLayout::ROWS * WindyCliffLayout::COLS + 1;
pub const WINDY_CLIFF_ACTIONS: usize = 4;

/// WindyCliff with wind intensity `theta`: every action other than "down" is
/// replaced by "down" with probability `theta / 3`.
///
/// The goal and cliff cells pay their `+100` / `-100` on the step out of the
/// cell, which always leads to the absorbing state. Rewards therefore do not
/// depend on `theta`, so cliffs with different winds share one reward table.
pub fn make_windy_cliff(theta: f64, gamma: f64) -> Result<TabularMdp> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(format!(
            "wind intensity must lie in [0, 1], got {theta}"
        )));
    }
    type L = WindyCliffLayout;
    let (ns, na) = (WINDY_CLIFF_STATES, WINDY_CLIFF_ACTIONS);
    let mut reward = vec![0.0; ns * na];
    let mut transition = vec![0.0; ns * na * ns];
    let gust = theta / 3.0;
    for s in 0..ns {
        for a in 0..na {
            let row = &mut transition[(s * na + a) * ns..(s * na + a + 1) * ns];
            if s == L::ABSORBING || L::is_terminal_cell(s) {
                reward[s * na + a] = if s == L::GOAL {
                    L::GOAL_REWARD
                } else if s == L::ABSORBING {
                    0.0
                } else {
                    L::CLIFF_REWARD
                };
                row[L::ABSORBING] = 1.0;
                continue;
            }
            if a == L::DOWN {
                row[L::step(s, L::DOWN)] += 1.0;
            } else {
                row[L::step(s, a)] += 1.0 - gust;
                row[L::step(s, L::DOWN)] += gust;
            }
        }
    }
    TabularMdp::new(ns, na, reward, transition, gamma)
}

/// `theta_k = low + (high - low) * u_k` with `u_k` the first uniform draw of
/// the `(seed, wind, k)` stream.
pub fn wind_intensities(seed: u64, n: usize, low: f64, high: f64) -> Result<Vec<f64>> {
    wind_draws(seed, tags::WIND, n, low, high)
}

pub(crate) fn wind_draws(seed: u64, tag: &str, n: usize, low: f64, high: f64) -> Result<Vec<f64>> {
    if !(0.0 <= low && low <= high && high <= 1.0) {
        return Err(Error::invalid(format!(
            "wind range must satisfy 0 <= low <= high <= 1, got [{low}, {high}]"
        )));
    }
    Ok((0..n)
        .map(|k| {
            let u: f64 = substream(seed, tag, k as u64).random();
            (low + (high - low) * u).clamp(low, high)
        })
        .collect())
}

/// `n` WindyCliffs with i.i.d. uniform wind intensities; `d0` is the start
/// cell.
pub fn make_windy_cliff_task(
    seed: u64,
    n: usize,
    theta_low: f64,
    theta_high: f64,
    gamma: f64,
) -> Result<FederatedTask> {
    if n == 0 {
        return Err(Error::invalid("a federated task needs n >= 1"));
    }
    let envs = wind_intensities(seed, n, theta_low, theta_high)?
        .into_iter()
        .map(|theta| make_windy_cliff(theta, gamma))
        .collect::<Result<Vec<_>>>()?;
    FederatedTask::new(
        envs,
        StateDistribution::point(WINDY_CLIFF_STATES, WindyCliffLayout::START),
    )
}
