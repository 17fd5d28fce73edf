//! Gaussian RBF state features with a constant bias, and their lift to
//! state-action pairs.
//!
//! One RBF sits on every open cell; adjacent centres are one unit apart, so
//! with the default width the representation is nearly tabular.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, GridWorld, StateId, NUM_ACTIONS};

/// Which denominator the RBF exponent uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RbfDenominator {
    /// `exp(-d² / (2σ²))`
    #[default]
    #[serde(rename = "2sigma_sq")]
    TwoSigmaSq,
    /// `exp(-d² / σ²)`
    #[serde(rename = "sigma_sq")]
    SigmaSq,
}

/// How a state-action pair is embedded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionEncoding {
    /// `Φ(s, a) = φ(successor(s, a))`, same dimension as `φ`.
    Successor,
    /// `φ(s)` placed in the block of `a` inside a `4 × dim(φ)` vector.
    #[default]
    ActionBlocks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub sigma_sq: f64,
    pub bias_value: f64,
    pub rbf_denominator: RbfDenominator,
    pub action_encoding: ActionEncoding,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            sigma_sq: 0.05,
            bias_value: 0.1,
            rbf_denominator: RbfDenominator::TwoSigmaSq,
            action_encoding: ActionEncoding::ActionBlocks,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FeatureMap {
    config: FeatureConfig,
    state_features: Vec<Vec<f64>>,
}

impl FeatureMap {
    pub fn new(grid: &GridWorld, config: FeatureConfig) -> Result<Self> {
        if !(config.sigma_sq > 0.0 && config.sigma_sq.is_finite()) {
            return Err(Error::Config(format!("sigma_sq {} must be positive", config.sigma_sq)));
        }
        if !(config.bias_value > 0.0 && config.bias_value <= 1.0) {
            return Err(Error::Config(format!("bias_value {} must lie in (0, 1]", config.bias_value)));
        }
        let denom = match config.rbf_denominator {
            RbfDenominator::TwoSigmaSq => 2.0 * config.sigma_sq,
            RbfDenominator::SigmaSq => config.sigma_sq,
        };
        let centers: Vec<(f64, f64)> = grid
            .states()
            .map(|s| {
                let c = grid.cell_of(s);
                (c.row as f64, c.col as f64)
            })
            .collect();
        let state_features = centers
            .iter()
            .map(|&(r, c)| {
                let mut phi: Vec<f64> = centers
                    .iter()
                    .map(|&(cr, cc)| {
                        let d2 = (r - cr).powi(2) + (c - cc).powi(2);
                        (-d2 / denom).exp()
                    })
                    .collect();
                phi.push(config.bias_value);
                phi
            })
            .collect();
        Ok(FeatureMap { config, state_features })
    }

    pub fn canonical(grid: &GridWorld) -> Self {
        Self::new(grid, FeatureConfig::default()).expect("default feature config is valid")
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Length of `φ(s)`: one RBF per open cell plus the bias.
    pub fn state_dim(&self) -> usize {
        self.state_features.len() + 1
    }

    /// Length of `Φ(s, a)`.
    pub fn dim(&self) -> usize {
        match self.config.action_encoding {
            ActionEncoding::Successor => self.state_dim(),
            ActionEncoding::ActionBlocks => NUM_ACTIONS * self.state_dim(),
        }
    }

    pub fn bias_index(&self) -> usize {
        self.state_dim() - 1
    }

    /// `φ(s)`. Panics if `s` does not come from the grid this map was built on.
    pub fn phi_state(&self, s: StateId) -> &[f64] {
        &self.state_features[s.index()]
    }

    pub fn try_phi_state(&self, s: StateId) -> Result<&[f64]> {
        self.state_features
            .get(s.index())
            .map(Vec::as_slice)
            .ok_or(Error::InvalidState(s.index()))
    }

    /// `Φ(s, a)` under the configured encoding.
    pub fn phi_state_action(&self, grid: &GridWorld, s: StateId, a: Action) -> Vec<f64> {
        match self.config.action_encoding {
            ActionEncoding::Successor => self.phi_state(grid.successor(s, a)).to_vec(),
            ActionEncoding::ActionBlocks => {
                let d = self.state_dim();
                let mut out = vec![0.0; NUM_ACTIONS * d];
                out[a.index() * d..(a.index() + 1) * d].copy_from_slice(self.phi_state(s));
                out
            }
        }
    }
}
