//! A simulated trainer that judges each action against the task-optimal
//! policy, plus scripted start-to-goal demonstrations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irl::{DemoSource, Demonstration};
use crate::mdp::{task_value_iteration, Action, GridWorld, QTable, StateId};
use crate::reward::{DelayModel, FeedbackEvent};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    /// Probability of responding to a step at all.
    pub feedback_prob: f64,
    /// Probability that a response has the wrong sign.
    pub error_rate: f64,
    pub delay: DelayModel,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig { feedback_prob: 0.7, error_rate: 0.0, delay: DelayModel::default(), seed: 0 }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("feedback_prob", self.feedback_prob), ("error_rate", self.error_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} {p} must lie in [0, 1]")));
            }
        }
        self.delay.validate()
    }
}

#[derive(Clone, Debug)]
pub struct OracleTrainer {
    optimal_q: QTable,
    config: TrainerConfig,
    rng: ChaCha8Rng,
}

impl OracleTrainer {
    pub fn new(grid: &GridWorld, config: TrainerConfig) -> Result<Self> {
        config.validate()?;
        let optimal_q = task_value_iteration(grid, 0.99, 1e-12)?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(OracleTrainer { optimal_q, config, rng })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn optimal_q(&self) -> &QTable {
        &self.optimal_q
    }

    /// Whether `a` is among the task-optimal actions at `s`.
    pub fn is_optimal(&self, s: StateId, a: Action) -> bool {
        self.optimal_q.get(s, a) >= self.optimal_q.value(s) - 1e-12
    }

    /// Possibly emits ±1 for the step `(s, a)` that finished at `step_end`.
    pub fn judge(&mut self, s: StateId, a: Action, step_end: f64) -> Option<FeedbackEvent> {
        if self.rng.random::<f64>() >= self.config.feedback_prob {
            return None;
        }
        let mut value = if self.is_optimal(s, a) { 1.0 } else { -1.0 };
        if self.rng.random::<f64>() < self.config.error_rate {
            value = -value;
        }
        let delay = self.config.delay.sample(&mut self.rng);
        Some(FeedbackEvent { value, received_at: step_end + delay })
    }
}

/// A shortest start-to-goal demonstration, lengthened by `suboptimality`
/// extra steps: back-and-forth detours along the path, plus one wall bump
/// when the count is odd.
pub fn scripted_demo(grid: &GridWorld, suboptimality: usize) -> Result<Demonstration> {
    let q = task_value_iteration(grid, 0.99, 1e-12)?;
    let mut path: Vec<(StateId, Action)> = Vec::new();
    let mut s = grid.start_state();
    while !grid.is_goal(s) {
        let a = q.greedy(s);
        path.push((s, a));
        s = grid.successor(s, a);
        if path.len() > grid.num_states() {
            return Err(Error::InvalidLayout("no shortest path to the goal".into()));
        }
    }

    let mut steps = Vec::with_capacity(path.len() + suboptimality);
    let mut detours = suboptimality / 2;
    let mut bump = suboptimality % 2 == 1;
    for (i, &(s, a)) in path.iter().enumerate() {
        if bump {
            if let Some(b) = Action::ALL.into_iter().find(|b| grid.successor(s, *b) == s) {
                steps.push((s, b));
                bump = false;
            }
        }
        if detours > 0 && i > 0 {
            let (prev, forward) = path[i - 1];
            let back = forward.inverse();
            if grid.successor(s, back) == prev {
                steps.push((s, back));
                steps.push((prev, forward));
                detours -= 1;
            }
        }
        steps.push((s, a));
    }
    if detours > 0 || bump {
        return Err(Error::Config(format!("cannot fit {suboptimality} detour steps on this layout")));
    }
    let demo = Demonstration::new(steps, DemoSource::Scripted);
    demo.validate(grid)?;
    Ok(demo)
}
