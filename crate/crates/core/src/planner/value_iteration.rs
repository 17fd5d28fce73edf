use super::RewardTable;
use crate::error::{Error, Result};
use crate::mdp::{argmax_action, Action, Dynamics, QTable, StateId, NUM_ACTIONS};

/// Backed-up value of `(s, a)`: `R̂(s, a) + γ Σ T(s, a, s') max Q(s', ·)`,
/// with nothing accruing past a terminal successor.
fn backup<D: Dynamics>(rewards: &RewardTable, mdp: &D, values: &[f64], gamma: f64, s: StateId, a: Action) -> f64 {
    let mut future = 0.0;
    mdp.for_each_outcome(s, a, |t, p| {
        if !mdp.is_terminal(t) {
            future += p * values[t.index()];
        }
    });
    rewards.get(s, a) + gamma * future
}

/// Fixed point of `Q(s,a) ← R̂(s,a) + γ Σ T(s,a,s') max Q(s',·)`.
///
/// Terminal states have no continuation, so their row is `R̂` itself. Sweeps
/// stop once no entry changes by more than `tolerance`.
pub fn q_value_iteration<D: Dynamics>(rewards: &RewardTable, mdp: &D, gamma: f64, tolerance: f64) -> Result<QTable> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!("discount {gamma} must lie in [0, 1)")));
    }
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::Config(format!("tolerance {tolerance} must be positive")));
    }
    let n = mdp.num_states();
    if rewards.num_states() != n {
        return Err(Error::LengthMismatch { expected: n, actual: rewards.num_states() });
    }
    let mut q = QTable::from_rows((0..n).map(|s| *rewards.row(StateId(s))).collect());
    loop {
        let values: Vec<f64> = (0..n).map(|s| q.value(StateId(s))).collect();
        let mut change: f64 = 0.0;
        let mut rows = Vec::with_capacity(n);
        for s in (0..n).map(StateId) {
            let mut row = [0.0; NUM_ACTIONS];
            for a in Action::ALL {
                row[a.index()] = if mdp.is_terminal(s) {
                    rewards.get(s, a)
                } else {
                    backup(rewards, mdp, &values, gamma, s, a)
                };
                change = change.max((row[a.index()] - q.get(s, a)).abs());
            }
            rows.push(row);
        }
        q = QTable::from_rows(rows);
        if change <= tolerance {
            return Ok(q);
        }
    }
}

/// `argmax_a [R̂(s,a) + γ Σ T(s,a,s') max Q(s',·)]`, lowest action index on ties.
pub fn greedy_action<D: Dynamics>(rewards: &RewardTable, q: &QTable, mdp: &D, gamma: f64, s: StateId) -> Action {
    let values: Vec<f64> = (0..mdp.num_states()).map(|t| q.value(StateId(t))).collect();
    let bracket = Action::ALL.map(|a| backup(rewards, mdp, &values, gamma, s, a));
    argmax_action(&bracket)
}
