//! Interactive reward shaping on a grid world: a TAMER-style human-reward
//! model planned over with UCT, optionally seeded by projection IRL from a
//! single demonstration.

pub mod error;
pub mod experiment;
pub mod features;
pub mod heatmap;
pub mod irl;
pub mod mdp;
pub mod planner;
pub mod reward;
pub mod session;
pub mod trainer;

pub use error::{Error, Result};
