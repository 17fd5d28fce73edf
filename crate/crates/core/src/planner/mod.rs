//! Action selection from a learned reward model.
//!
//! Both planners work on a [`RewardTable`], the model's prediction for every
//! state-action pair, frozen for the duration of one planning call.

mod uct;
mod value_iteration;

pub use uct::{uct_plan, Backup, SearchTree, UctConfig, UctPlanner, UctResult};
pub use value_iteration::{greedy_action, q_value_iteration};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::FeatureMap;
use crate::mdp::{Action, GridWorld, StateId, NUM_ACTIONS};
use crate::reward::RewardModel;

/// How the acting agent turns a search into a move.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActVia {
    /// The most visited root action.
    #[default]
    UctRoot,
    /// Argmax of the root's estimated action values.
    EstimateGreedy,
}

/// `R̂(s, a)` for every pair.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardTable {
    values: Vec<[f64; NUM_ACTIONS]>,
}

impl RewardTable {
    pub fn from_model(model: &RewardModel, map: &FeatureMap, grid: &GridWorld) -> Result<Self> {
        let values = grid
            .states()
            .map(|s| {
                let mut row = [0.0; NUM_ACTIONS];
                for a in Action::ALL {
                    row[a.index()] = model.predict(&map.phi_state_action(grid, s, a))?;
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RewardTable { values })
    }

    pub fn from_rows(values: Vec<[f64; NUM_ACTIONS]>) -> Self {
        RewardTable { values }
    }

    #[inline]
    pub fn get(&self, s: StateId, a: Action) -> f64 {
        self.values[s.index()][a.index()]
    }

    pub fn row(&self, s: StateId) -> &[f64; NUM_ACTIONS] {
        &self.values[s.index()]
    }

    pub fn num_states(&self) -> usize {
        self.values.len()
    }
}
