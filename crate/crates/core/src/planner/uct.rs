//! UCT over the grid with nodes keyed by `(state, depth)`.
//!
//! Each call to [`UctPlanner::plan`] starts from an empty tree; statistics
//! never carry over between agent time steps because the reward model may
//! have changed in between.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActVia, RewardTable};
use crate::error::{Error, Result};
use crate::mdp::{Action, GridWorld, StateId, NUM_ACTIONS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UctConfig {
    pub gamma: f64,
    pub simulations: usize,
    pub max_depth: usize,
    pub exploration: f64,
    pub seed: u64,
    pub act_via: ActVia,
    pub backup: Backup,
}

/// How returns reach the tree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backup {
    /// `Q̂(s, a)` is the mean return of the simulations through it.
    #[default]
    Mean,
    /// `Q̂(s, a) = R̂(s, a) + γ max_b Q̂(s', b)` over the child's tried
    /// actions, falling back to the mean rollout return while the child has
    /// no statistics.
    Max,
}

impl Default for UctConfig {
    fn default() -> Self {
        UctConfig {
            gamma: 0.9,
            simulations: 1000,
            max_depth: 50,
            exploration: std::f64::consts::SQRT_2,
            seed: 0,
            act_via: ActVia::UctRoot,
            backup: Backup::Mean,
        }
    }
}

impl UctConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma_uct {} must lie in [0, 1)", self.gamma)));
        }
        if self.simulations == 0 {
            return Err(Error::Config("simulations_per_step must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if !(self.exploration >= 0.0 && self.exploration.is_finite()) {
            return Err(Error::Config(format!("exploration constant {} is invalid", self.exploration)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
struct Node {
    visits: u64,
    action_visits: [u64; NUM_ACTIONS],
    action_values: [f64; NUM_ACTIONS],
}

impl Node {
    /// UCB1 on estimates rescaled to `[0, 1]` by the range of returns seen so
    /// far in this search, so the constant does not depend on reward scale.
    fn select(&self, exploration: f64, range: (f64, f64)) -> Action {
        if let Some(i) = self.action_visits.iter().position(|n| *n == 0) {
            return Action::ALL[i];
        }
        let (lo, hi) = range;
        let spread = if hi > lo { hi - lo } else { 1.0 };
        let log_n = (self.visits as f64).ln();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for i in 0..NUM_ACTIONS {
            let q = (self.action_values[i] - lo) / spread;
            let score = q + exploration * (log_n / self.action_visits[i] as f64).sqrt();
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        Action::ALL[best]
    }
}

const NONE: u32 = u32::MAX;

/// Search statistics: `N(s)`, `N(s, a)` and mean returns `Q̂(s, a)` per node.
#[derive(Clone, Debug, Default)]
pub struct SearchTree {
    nodes: Vec<Node>,
    slots: Vec<u32>,
    depth_stride: usize,
}

impl SearchTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn reset(&mut self, num_states: usize, max_depth: usize) {
        self.nodes.clear();
        self.depth_stride = max_depth + 1;
        self.slots.clear();
        self.slots.resize(num_states * self.depth_stride, NONE);
    }

    fn slot(&self, s: StateId, depth: usize) -> usize {
        s.index() * self.depth_stride + depth
    }

    fn get(&self, s: StateId, depth: usize) -> Option<usize> {
        match self.slots[self.slot(s, depth)] {
            NONE => None,
            id => Some(id as usize),
        }
    }

    fn insert(&mut self, s: StateId, depth: usize) -> usize {
        let id = self.nodes.len();
        let slot = self.slot(s, depth);
        self.slots[slot] = id as u32;
        self.nodes.push(Node::default());
        id
    }

    /// Checks `N(s) = Σ_a N(s, a)` and finite estimates on every node.
    pub fn is_consistent(&self) -> bool {
        self.nodes.iter().all(|n| {
            n.visits == n.action_visits.iter().sum::<u64>() && n.action_values.iter().all(|v| v.is_finite())
        })
    }
}

/// Root statistics after a search.
#[derive(Clone, Debug, PartialEq)]
pub struct UctResult {
    pub action: Action,
    pub root_visits: u64,
    pub action_visits: [u64; NUM_ACTIONS],
    pub action_values: [f64; NUM_ACTIONS],
    pub tree_size: usize,
}

impl UctResult {
    /// Most visited root action, then highest estimate, then lowest index.
    fn recommend(action_visits: &[u64; NUM_ACTIONS], action_values: &[f64; NUM_ACTIONS]) -> Action {
        let mut best = 0;
        for i in 1..NUM_ACTIONS {
            let more = action_visits[i] > action_visits[best];
            let tie_better = action_visits[i] == action_visits[best] && action_values[i] > action_values[best];
            if more || tie_better {
                best = i;
            }
        }
        Action::ALL[best]
    }

    fn greedy_on_estimates(action_visits: &[u64; NUM_ACTIONS], action_values: &[f64; NUM_ACTIONS]) -> Action {
        let mut best: Option<usize> = None;
        for i in 0..NUM_ACTIONS {
            if action_visits[i] == 0 {
                continue;
            }
            if best.is_none_or(|b| action_values[i] > action_values[b]) {
                best = Some(i);
            }
        }
        Action::ALL[best.unwrap_or(0)]
    }
}

/// A UCT searcher that owns its tree so the per-step reset is observable.
#[derive(Clone, Debug)]
pub struct UctPlanner {
    config: UctConfig,
    tree: SearchTree,
}

impl UctPlanner {
    pub fn new(config: UctConfig) -> Result<Self> {
        config.validate()?;
        Ok(UctPlanner { config, tree: SearchTree::new() })
    }

    pub fn config(&self) -> &UctConfig {
        &self.config
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    /// Discards all statistics.
    pub fn reset(&mut self) {
        self.tree = SearchTree::new();
    }

    /// Runs a fresh search from `root` using `seed` for the rollout stream.
    pub fn plan(&mut self, rewards: &RewardTable, grid: &GridWorld, root: StateId, seed: u64) -> Result<UctResult> {
        grid.cell(root)?;
        let cfg = &self.config;
        let gamma = cfg.gamma;
        self.tree.reset(grid.num_states(), cfg.max_depth);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // (node, action, reward, successor)
        let mut path: Vec<(usize, Action, f64, StateId)> = Vec::with_capacity(cfg.max_depth);
        let mut range = (f64::INFINITY, f64::NEG_INFINITY);

        for _ in 0..cfg.simulations {
            path.clear();
            let mut s = root;
            let mut depth = 0;

            // selection, stopping after the first newly created node
            while depth < cfg.max_depth && !grid.is_goal(s) {
                let (id, fresh) = match self.tree.get(s, depth) {
                    Some(id) => (id, false),
                    None => (self.tree.insert(s, depth), true),
                };
                let a = self.tree.nodes[id].select(cfg.exploration, range);
                let next = grid.successor(s, a);
                path.push((id, a, rewards.get(s, a), next));
                s = next;
                depth += 1;
                if fresh {
                    break;
                }
            }

            // uniform random continuation
            let mut tail = 0.0;
            let mut discount = 1.0;
            while depth < cfg.max_depth && !grid.is_goal(s) {
                let a = Action::ALL[rng.random_range(0..NUM_ACTIONS)];
                tail += discount * rewards.get(s, a);
                discount *= gamma;
                s = grid.successor(s, a);
                depth += 1;
            }

            let mut ret = tail;
            let mut child = match path.len() {
                0 => None,
                n if n < cfg.max_depth && !grid.is_goal(path[n - 1].3) => self.tree.get(path[n - 1].3, n),
                _ => None,
            };
            for &(id, a, r, _) in path.iter().rev() {
                let child_best = child.map(|c| &self.tree.nodes[c]).filter(|c| c.visits > 0).map(|c| {
                    (0..NUM_ACTIONS)
                        .filter(|&i| c.action_visits[i] > 0)
                        .map(|i| c.action_values[i])
                        .fold(f64::NEG_INFINITY, f64::max)
                });
                ret = r + gamma * ret;
                let node = &mut self.tree.nodes[id];
                node.visits += 1;
                node.action_visits[a.index()] += 1;
                let n = node.action_visits[a.index()] as f64;
                match (cfg.backup, child_best) {
                    (Backup::Max, Some(v)) => {
                        ret = r + gamma * v;
                        node.action_values[a.index()] = ret;
                    }
                    _ => node.action_values[a.index()] += (ret - node.action_values[a.index()]) / n,
                }
                range = (range.0.min(ret), range.1.max(ret));
                child = Some(id);
            }
        }

        let (root_visits, action_visits, action_values) = match self.tree.get(root, 0) {
            Some(id) => {
                let n = &self.tree.nodes[id];
                (n.visits, n.action_visits, n.action_values)
            }
            // planning from the goal: nothing to search
            None => (0, [0; NUM_ACTIONS], [0.0; NUM_ACTIONS]),
        };
        let action = match cfg.act_via {
            ActVia::UctRoot => UctResult::recommend(&action_visits, &action_values),
            ActVia::EstimateGreedy => UctResult::greedy_on_estimates(&action_visits, &action_values),
        };
        Ok(UctResult { action, root_visits, action_visits, action_values, tree_size: self.tree.len() })
    }
}

/// One-shot UCT search with a fresh tree, seeded from `config.seed`.
pub fn uct_plan(rewards: &RewardTable, grid: &GridWorld, root: StateId, config: &UctConfig) -> Result<UctResult> {
    UctPlanner::new(config.clone())?.plan(rewards, grid, root, config.seed)
}
