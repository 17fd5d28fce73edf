//! Apprenticeship learning by the projection method.
//!
//! Recovers state-reward weights `w` (reward `w · φ(s)`) under which a
//! demonstrated trajectory is near-optimal, by repeatedly planning for the
//! current feature-expectation gap and projecting the expert's feature
//! expectations onto the segment toward the new policy's.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ActionEncoding, FeatureMap};
use crate::mdp::{Action, Cell, GridWorld, StateId, NUM_ACTIONS};
use crate::planner::{q_value_iteration, uct_plan, RewardTable, UctConfig};
use crate::reward::{dot, RewardModel};

/// Where a demonstration came from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoSource {
    LiveKeyboard,
    #[default]
    File,
    Scripted,
}

/// A start-to-goal sequence of `(state, action)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub steps: Vec<(StateId, Action)>,
    pub source: DemoSource,
}

#[derive(Serialize, Deserialize)]
struct DemoRecord {
    state: [usize; 2],
    action: Action,
}

impl Demonstration {
    pub fn new(steps: Vec<(StateId, Action)>, source: DemoSource) -> Self {
        Demonstration { steps, source }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Each pair must lead to the next pair's state, and the last action must
    /// land on the goal.
    pub fn validate(&self, grid: &GridWorld) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Demonstration { index: 0, message: "demonstration is empty".into() });
        }
        for (i, &(s, a)) in self.steps.iter().enumerate() {
            let next = grid
                .transition(s, a)
                .map_err(|e| Error::Demonstration { index: i, message: e.to_string() })?;
            match self.steps.get(i + 1) {
                Some(&(expected, _)) if expected != next => {
                    return Err(Error::Demonstration {
                        index: i + 1,
                        message: format!(
                            "state {} does not follow {} from {}",
                            grid.cell_of(expected),
                            a,
                            grid.cell_of(s)
                        ),
                    })
                }
                None if !grid.is_goal(next) => {
                    return Err(Error::Demonstration {
                        index: i,
                        message: format!("ends at {} instead of the goal", grid.cell_of(next)),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Every visited state including the final one.
    pub fn visited(&self, grid: &GridWorld) -> Vec<StateId> {
        let mut out: Vec<StateId> = self.steps.iter().map(|(s, _)| *s).collect();
        if let Some(&(s, a)) = self.steps.last() {
            out.push(grid.successor(s, a));
        }
        out
    }

    pub fn to_json(&self, grid: &GridWorld) -> Result<String> {
        let records: Vec<DemoRecord> = self
            .steps
            .iter()
            .map(|&(s, a)| {
                let c = grid.cell(s)?;
                Ok(DemoRecord { state: [c.row, c.col], action: a })
            })
            .collect::<Result<_>>()?;
        Ok(serde_json::to_string_pretty(&records)?)
    }

    pub fn from_json(text: &str, grid: &GridWorld, source: DemoSource) -> Result<Self> {
        let records: Vec<DemoRecord> = serde_json::from_str(text)?;
        let steps = records
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let cell = Cell::new(r.state[0], r.state[1]);
                let s = grid.state_of(cell).ok_or_else(|| Error::Demonstration {
                    index: i,
                    message: format!("{cell} is not an open cell"),
                })?;
                Ok((s, r.action))
            })
            .collect::<Result<_>>()?;
        let demo = Demonstration { steps, source };
        demo.validate(grid)?;
        Ok(demo)
    }

    pub fn load(path: &Path, grid: &GridWorld) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, grid, DemoSource::File)
    }

    pub fn save(&self, path: &Path, grid: &GridWorld) -> Result<()> {
        std::fs::write(path, self.to_json(grid)?)?;
        Ok(())
    }
}

/// Discounted feature counts `μ = Σ γ^k φ(s_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureExpectations {
    pub mu: Vec<f64>,
    pub gamma: f64,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!("discount {gamma} must lie in [0, 1)")));
    }
    Ok(())
}

/// Empirical feature expectations of a single deterministic trajectory,
/// counting every visited state including the goal.
pub fn feature_expectations_from_trajectory(
    demo: &Demonstration,
    grid: &GridWorld,
    map: &FeatureMap,
    gamma: f64,
) -> Result<FeatureExpectations> {
    check_gamma(gamma)?;
    demo.validate(grid)?;
    let mut mu = vec![0.0; map.state_dim()];
    for (k, s) in demo.visited(grid).into_iter().enumerate() {
        let weight = gamma.powi(k as i32);
        for (m, x) in mu.iter_mut().zip(map.phi_state(s)) {
            *m += weight * x;
        }
    }
    Ok(FeatureExpectations { mu, gamma })
}

/// Smallest horizon with `γ^h < 1e-6`.
pub fn default_horizon(gamma: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    (1e-6f64.ln() / gamma.ln()).floor() as usize + 1
}

/// Feature expectations of a deterministic stationary policy (one action per
/// state), rolled out from the start for `horizon` moves or until the goal.
pub fn feature_expectations_from_policy(
    policy: &[Action],
    grid: &GridWorld,
    map: &FeatureMap,
    gamma: f64,
    horizon: usize,
) -> Result<FeatureExpectations> {
    check_gamma(gamma)?;
    if policy.len() != grid.num_states() {
        return Err(Error::LengthMismatch { expected: grid.num_states(), actual: policy.len() });
    }
    let mut mu = vec![0.0; map.state_dim()];
    let mut s = grid.start_state();
    let mut weight = 1.0;
    for k in 0..=horizon {
        for (m, x) in mu.iter_mut().zip(map.phi_state(s)) {
            *m += weight * x;
        }
        if grid.is_goal(s) || k == horizon {
            break;
        }
        s = grid.successor(s, policy[s.index()]);
        weight *= gamma;
    }
    Ok(FeatureExpectations { mu, gamma })
}

/// Feature expectations of the policy that picks each action with
/// probability 1/4, computed exactly by propagating the state distribution.
pub fn feature_expectations_uniform(
    grid: &GridWorld,
    map: &FeatureMap,
    gamma: f64,
    horizon: usize,
) -> Result<FeatureExpectations> {
    check_gamma(gamma)?;
    let n = grid.num_states();
    let mut occupancy = vec![0.0; n];
    let mut dist = vec![0.0; n];
    dist[grid.start_state().index()] = 1.0;
    let mut weight = 1.0;
    for k in 0..=horizon {
        for (o, p) in occupancy.iter_mut().zip(&dist) {
            *o += weight * p;
        }
        if k == horizon {
            break;
        }
        let mut next = vec![0.0; n];
        for s in grid.states().filter(|s| !grid.is_goal(*s)) {
            let p = dist[s.index()];
            if p > 0.0 {
                for a in Action::ALL {
                    next[grid.successor(s, a).index()] += p / NUM_ACTIONS as f64;
                }
            }
        }
        dist = next;
        weight *= gamma;
    }
    let mut mu = vec![0.0; map.state_dim()];
    for s in grid.states() {
        for (m, x) in mu.iter_mut().zip(map.phi_state(s)) {
            *m += occupancy[s.index()] * x;
        }
    }
    Ok(FeatureExpectations { mu, gamma })
}

/// `V(π) = w · μ(π)`.
pub fn policy_value(weights: &[f64], mu: &FeatureExpectations) -> Result<f64> {
    if weights.len() != mu.mu.len() {
        return Err(Error::LengthMismatch { expected: mu.mu.len(), actual: weights.len() });
    }
    Ok(dot(weights, &mu.mu))
}

/// Planner used to find the optimal policy for each candidate reward.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerPlanner {
    #[default]
    ValueIteration,
    Uct(UctConfig),
}

/// The policy the projection loop starts from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPolicy {
    /// Every action with probability 1/4 in every state.
    #[default]
    Uniform,
    /// One uniformly drawn action per state, fixed for the whole rollout.
    Random { seed: u64 },
    Given { actions: Vec<Action> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrlConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub vi_tolerance: f64,
    pub planner: InnerPlanner,
    pub initial_policy: InitialPolicy,
}

impl Default for IrlConfig {
    fn default() -> Self {
        IrlConfig {
            gamma: 0.99,
            epsilon: 0.05,
            max_iter: 30,
            vi_tolerance: 1e-9,
            planner: InnerPlanner::ValueIteration,
            initial_policy: InitialPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlResult {
    /// Unit-norm state-reward weights.
    pub weights: Vec<f64>,
    /// `t_i = ‖μ_E − μ̄_{i−1}‖` per iteration.
    pub margin_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Optimal policy for `weights` found by the inner planner, if any.
    pub policy: Option<Vec<Action>>,
    pub expert: FeatureExpectations,
    /// Coefficients expressing the final `μ̄` over `μ_0, …, μ_k`.
    pub mixture: Vec<f64>,
}

/// State-reward weights expressed as a [`RewardTable`] via successor features.
pub fn state_reward_table(weights: &[f64], map: &FeatureMap, grid: &GridWorld) -> RewardTable {
    let values: Vec<f64> = grid.states().map(|s| dot(weights, map.phi_state(s))).collect();
    RewardTable::from_rows(
        grid.states()
            .map(|s| Action::ALL.map(|a| values[grid.successor(s, a).index()]))
            .collect(),
    )
}

fn optimal_policy(weights: &[f64], grid: &GridWorld, map: &FeatureMap, config: &IrlConfig) -> Result<Vec<Action>> {
    let rewards = state_reward_table(weights, map, grid);
    match &config.planner {
        InnerPlanner::ValueIteration => {
            let q = q_value_iteration(&rewards, grid, config.gamma, config.vi_tolerance)?;
            Ok(grid.states().map(|s| q.greedy(s)).collect())
        }
        InnerPlanner::Uct(uct) => {
            let uct = UctConfig { gamma: config.gamma, ..uct.clone() };
            grid.states()
                .map(|s| Ok(uct_plan(&rewards, grid, s, &UctConfig { seed: uct.seed ^ s.index() as u64, ..uct.clone() })?.action))
                .collect()
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Runs the projection loop. Non-convergence within `max_iter` is reported
/// through `converged = false`, not as an error.
pub fn projection_irl(
    demo: &Demonstration,
    grid: &GridWorld,
    map: &FeatureMap,
    config: &IrlConfig,
) -> Result<IrlResult> {
    check_gamma(config.gamma)?;
    if config.epsilon.is_nan() || config.epsilon <= 0.0 || config.max_iter == 0 {
        return Err(Error::Config("epsilon must be positive and max_iter at least 1".into()));
    }
    let horizon = default_horizon(config.gamma);
    let expert = feature_expectations_from_trajectory(demo, grid, map, config.gamma)?;

    let mut mu_bar = match &config.initial_policy {
        InitialPolicy::Uniform => feature_expectations_uniform(grid, map, config.gamma, horizon)?.mu,
        InitialPolicy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let initial: Vec<Action> =
                grid.states().map(|_| Action::ALL[rng.random_range(0..NUM_ACTIONS)]).collect();
            feature_expectations_from_policy(&initial, grid, map, config.gamma, horizon)?.mu
        }
        InitialPolicy::Given { actions } => feature_expectations_from_policy(actions, grid, map, config.gamma, horizon)?.mu,
    };
    let mut mixture = vec![1.0];

    let mut margin_history = Vec::new();
    // (distance of the policy's μ to μ_E, weights, policy) of the best candidate so far
    let mut best: Option<(f64, Vec<f64>, Vec<Action>)> = None;
    let mut converged = false;
    let mut last_w = Vec::new();

    for _ in 0..config.max_iter {
        let w = sub(&expert.mu, &mu_bar);
        let margin = norm(&w);
        margin_history.push(margin);
        last_w = w.clone();
        if margin <= config.epsilon {
            converged = true;
            break;
        }

        let policy = optimal_policy(&w, grid, map, config)?;
        let mu = feature_expectations_from_policy(&policy, grid, map, config.gamma, horizon)?.mu;
        let gap = norm(&sub(&expert.mu, &mu));
        if best.as_ref().is_none_or(|(d, _, _)| gap < *d) {
            best = Some((gap, w.clone(), policy));
        }

        let d = sub(&mu, &mu_bar);
        let dd = dot(&d, &d);
        let lambda = if dd > 0.0 { (dot(&d, &w) / dd).clamp(0.0, 1.0) } else { 0.0 };
        for (m, x) in mu_bar.iter_mut().zip(&d) {
            *m += lambda * x;
        }
        for c in mixture.iter_mut() {
            *c *= 1.0 - lambda;
        }
        mixture.push(lambda);
        if lambda == 0.0 {
            // the planner cannot move μ̄ any closer; further iterations would repeat
            break;
        }
    }

    let (raw, policy) = match best {
        Some((_, w, p)) => (w, Some(p)),
        None => (last_w, None),
    };
    let n = norm(&raw);
    let weights = if n > 0.0 { raw.iter().map(|x| x / n).collect() } else { raw };
    Ok(IrlResult {
        weights,
        iterations: margin_history.len(),
        margin_history,
        converged,
        policy,
        expert,
        mixture,
    })
}

/// Initial TAMER model from IRL weights with `R̂(s, a) = scale · w · φ(successor(s, a))`.
///
/// Under successor features that is just `scale × w`. Under per-action
/// blocks, block `a` puts the successor's reward on each cell's own centre,
/// which matches up to the small overlap between neighbouring RBFs.
pub fn seed_tamer(
    result: &IrlResult,
    map: &FeatureMap,
    grid: &GridWorld,
    scale: f64,
    learning_rate: f64,
) -> Result<RewardModel> {
    if !scale.is_finite() || result.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("IRL seed weights"));
    }
    if result.weights.len() != map.state_dim() {
        return Err(Error::LengthMismatch { expected: map.state_dim(), actual: result.weights.len() });
    }
    let scaled: Vec<f64> = result.weights.iter().map(|w| scale * w).collect();
    let weights = match map.config().action_encoding {
        ActionEncoding::Successor => scaled,
        ActionEncoding::ActionBlocks => {
            // Solve K·x = R*(successor(·, a)) per action, K the RBF Gram matrix.
            // Off-diagonal entries are tiny, so Jacobi converges in a few sweeps.
            let dim = map.state_dim();
            let n = grid.num_states();
            let mut blocks = vec![0.0; dim * NUM_ACTIONS];
            for a in Action::ALL {
                let target: Vec<f64> =
                    grid.states().map(|s| dot(&scaled, map.phi_state(grid.successor(s, a)))).collect();
                let mut x = target.clone();
                for _ in 0..200 {
                    let next: Vec<f64> = grid
                        .states()
                        .map(|s| {
                            let phi = map.phi_state(s);
                            let off: f64 = (0..n).filter(|&j| j != s.index()).map(|j| phi[j] * x[j]).sum();
                            (target[s.index()] - off) / phi[s.index()]
                        })
                        .collect();
                    let change = next.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                    x = next;
                    if change == 0.0 {
                        break;
                    }
                }
                blocks[a.index() * dim..a.index() * dim + n].copy_from_slice(&x);
            }
            blocks
        }
    };
    RewardModel::from_weights(weights, learning_rate)
}
