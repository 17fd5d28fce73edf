//! Exact reference computations over the true task: shortest paths and value
//! iteration on a +1-at-goal reward. The learning agent never sees this reward;
//! it exists for the simulated trainer and for tests.

use std::collections::VecDeque;

use super::{Action, Dynamics, GridWorld, QTable, StateId};
use crate::error::{Error, Result};

/// Shortest number of moves from `from` to `to`, or `None` when unreachable.
pub fn bfs_distance(grid: &GridWorld, from: StateId, to: StateId) -> Result<Option<usize>> {
    grid.cell(from)?;
    grid.cell(to)?;
    let mut dist = vec![usize::MAX; grid.num_states()];
    let mut queue = VecDeque::from([from]);
    dist[from.0] = 0;
    while let Some(s) = queue.pop_front() {
        if s == to {
            return Ok(Some(dist[s.0]));
        }
        for a in Action::ALL {
            let t = grid.successor(s, a);
            if dist[t.0] == usize::MAX {
                dist[t.0] = dist[s.0] + 1;
                queue.push_back(t);
            }
        }
    }
    Ok(None)
}

/// Optimal Q for reward 1 on entering a terminal state and 0 otherwise.
///
/// Sweeps synchronously until no entry moves by more than `tolerance`, which
/// bounds the Bellman residual of the result by `gamma * tolerance`.
pub fn task_value_iteration<D: Dynamics>(mdp: &D, gamma: f64, tolerance: f64) -> Result<QTable> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!("discount {gamma} must lie in [0, 1)")));
    }
    if tolerance <= 0.0 || !tolerance.is_finite() {
        return Err(Error::Config(format!("tolerance {tolerance} must be positive")));
    }
    let n = mdp.num_states();
    let mut q = QTable::zeros(n);
    loop {
        let values: Vec<f64> = (0..n).map(|s| q.value(StateId(s))).collect();
        let mut change: f64 = 0.0;
        let mut next = q.clone();
        for s in (0..n).map(StateId) {
            if mdp.is_terminal(s) {
                continue;
            }
            for a in Action::ALL {
                let mut v = 0.0;
                mdp.for_each_outcome(s, a, |t, p| {
                    v += if mdp.is_terminal(t) { p } else { p * gamma * values[t.0] };
                });
                change = change.max((v - q.get(s, a)).abs());
                next.set(s, a, v);
            }
        }
        q = next;
        if change <= tolerance {
            return Ok(q);
        }
    }
}

/// Result of following a Q table's greedy policy.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyPath {
    pub states: Vec<StateId>,
    pub actions: Vec<Action>,
    pub reached_goal: bool,
    /// The deterministic policy revisited a state, so it will never terminate.
    pub cycled: bool,
}

impl GreedyPath {
    pub fn steps(&self) -> usize {
        self.actions.len()
    }
}

/// Rolls the greedy policy of `q` out from `from` until the goal, a repeated
/// state, or `max_steps` moves.
pub fn greedy_path(grid: &GridWorld, q: &QTable, from: StateId, max_steps: usize) -> GreedyPath {
    let mut seen = vec![false; grid.num_states()];
    let mut s = from;
    let mut path = GreedyPath { states: vec![s], actions: Vec::new(), reached_goal: false, cycled: false };
    seen[s.0] = true;
    while !grid.is_goal(s) && path.actions.len() < max_steps {
        let a = q.greedy(s);
        s = grid.successor(s, a);
        path.actions.push(a);
        path.states.push(s);
        if seen[s.0] {
            path.cycled = true;
            return path;
        }
        seen[s.0] = true;
    }
    path.reached_goal = grid.is_goal(s);
    path
}
