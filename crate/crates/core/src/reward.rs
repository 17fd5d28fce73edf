//! Linear model of human reward with delay-based credit assignment.
//!
//! A feedback event received at time `t` is spread over the recent steps by a
//! delay density: a step that was on screen during `[start, end]` receives
//! the probability mass of delays in `[t - end, t - start]`. Each credited
//! step then becomes a supervised sample `(Φ, ĥ)` with `ĥ` the
//! credit-weighted sum of all events touching it.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureMap};
use crate::mdp::{Action, StateId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    weights: Vec<f64>,
    learning_rate: f64,
}

impl RewardModel {
    pub fn zeros(dim: usize, learning_rate: f64) -> Result<Self> {
        Self::from_weights(vec![0.0; dim], learning_rate)
    }

    pub fn from_weights(weights: Vec<f64>, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {learning_rate} must be positive")));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("reward model weight"));
        }
        Ok(RewardModel { weights, learning_rate })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `w · Φ`.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::LengthMismatch { expected: self.weights.len(), actual: features.len() });
        }
        Ok(dot(&self.weights, features))
    }

    /// One gradient step toward `label`: `w += α (ĥ - w·Φ) Φ`. Returns the
    /// error before the step.
    pub fn update(&mut self, features: &[f64], label: f64) -> Result<f64> {
        if !label.is_finite() {
            return Err(Error::NonFinite("feedback label"));
        }
        let delta = label - self.predict(features)?;
        let step = self.learning_rate * delta;
        for (w, x) in self.weights.iter_mut().zip(features) {
            *w += step * x;
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("reward model weight after update"));
        }
        Ok(delta)
    }

    /// Largest learning rate for which repeated updates on any single
    /// feature vector of `map` still contract: `2 / max ‖Φ‖²`.
    pub fn stable_rate_bound(map: &FeatureMap) -> f64 {
        let max_norm_sq = (0..map.state_dim() - 1)
            .map(|s| map.phi_state(StateId(s)).iter().map(|x| x * x).sum::<f64>())
            .fold(0.0, f64::max);
        2.0 / max_norm_sq
    }

    pub fn snapshot(&self, features: &FeatureConfig, source: &str) -> WeightSnapshot {
        WeightSnapshot {
            weights: self.weights.clone(),
            learning_rate: self.learning_rate,
            features: features.clone(),
            source: source.to_string(),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// JSON form of a weight vector, used for seeding, checkpoints and heat maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSnapshot {
    pub weights: Vec<f64>,
    pub learning_rate: f64,
    pub features: FeatureConfig,
    pub source: String,
}

impl WeightSnapshot {
    pub fn to_model(&self) -> Result<RewardModel> {
        RewardModel::from_weights(self.weights.clone(), self.learning_rate)
    }
}

/// A scalar judgement from the trainer, stamped on the session clock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub value: f64,
    pub received_at: f64,
}

/// Density of the trainer's reaction delay, in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    Uniform { min: f64, max: f64 },
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel::Uniform { min: 0.2, max: 0.8 }
    }
}

impl DelayModel {
    pub fn uniform(min: f64, max: f64) -> Result<Self> {
        let m = DelayModel::Uniform { min, max };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DelayModel::Uniform { min, max } => {
                if !(min >= 0.0 && max > min && max.is_finite()) {
                    return Err(Error::Config(format!("delay support [{min}, {max}] is invalid")));
                }
            }
        }
        Ok(())
    }

    /// `(d_min, d_max)`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            DelayModel::Uniform { min, max } => (min, max),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            DelayModel::Uniform { min, max } => ((x - min) / (max - min)).clamp(0.0, 1.0),
        }
    }

    /// `∫_lo^hi f(x) dx`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DelayModel::Uniform { min, max } => rng.random_range(min..=max),
        }
    }
}

/// One agent time step as the trainer saw it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub state: StateId,
    pub action: Action,
    pub next_state: StateId,
    pub started_at: f64,
    pub ended_at: f64,
    pub episode: usize,
    pub features: Vec<f64>,
}

/// Probability that `event` targets `step`.
pub fn credit(delay: &DelayModel, step: &StepRecord, event: &FeedbackEvent) -> f64 {
    delay.mass(event.received_at - step.ended_at, event.received_at - step.started_at)
}

/// Non-zero credits of one event over a time-ordered history, as
/// `(history index, credit)` pairs in history order.
pub fn event_credits(delay: &DelayModel, history: &[StepRecord], event: &FeedbackEvent) -> Vec<(usize, f64)> {
    let (d_min, d_max) = delay.support();
    // steps ending at or before t - d_max, or starting at or after t - d_min, get nothing
    let first = history.partition_point(|s| s.ended_at <= event.received_at - d_max);
    let last = history.partition_point(|s| s.started_at < event.received_at - d_min);
    (first..last.max(first))
        .filter_map(|i| {
            let c = credit(delay, &history[i], event);
            (c > 0.0).then_some((i, c))
        })
        .collect()
}

/// The supervised target assembled for one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Label {
    /// `ĥ = Σ value × credit`.
    pub value: f64,
    /// `Σ credit`; steps with zero total credit never get a label.
    pub credit: f64,
}

/// Labels for every step touched by at least one event, keyed by history index.
pub fn assign_labels(
    delay: &DelayModel,
    history: &[StepRecord],
    events: &[FeedbackEvent],
) -> BTreeMap<usize, Label> {
    let mut labels: BTreeMap<usize, Label> = BTreeMap::new();
    for event in events {
        for (i, c) in event_credits(delay, history, event) {
            let l = labels.entry(i).or_insert(Label { value: 0.0, credit: 0.0 });
            l.value += event.value * c;
            l.credit += c;
        }
    }
    labels
}
