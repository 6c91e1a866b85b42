//! Episodic environments built on the world simulator.
//!
//! Every environment is immutable and shared by all rollouts; per-episode
//! state lives in [`Environment::Episode`]. An episode is fully determined by
//! its seed, from which independent sub-streams are derived for the
//! initialization, each agent's dynamics sample, each agent's actuation noise
//! (sticky actions and wrenches), and observation/high-level noise.

mod flat;
mod high;
mod low;
mod sim;
mod toy;

pub use flat::FlatEnv;
pub use high::{run_decision, DecisionOutcome, HighLevelEnv};
pub use low::LowLevelEnv;
pub use sim::{DynamicsSource, EpisodeDynamics, SimEpisode};
pub use toy::PointMassEnv;

use crate::error::Result;

/// Sub-stream indices of an episode seed.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const POLICY: u64 = 1;
    pub const HIGH_LEVEL_NOISE: u64 = 2;
    pub const OBSERVATION_NOISE: u64 = 3;
    pub const OBJECT_DIMS: u64 = 4;
    /// Agent `i` uses `AGENT_BASE + 2i` for dynamics and `AGENT_BASE + 2i + 1` for actuation noise.
    pub const AGENT_BASE: u64 = 16;

    pub fn agent_dynamics(i: usize) -> u64 {
        AGENT_BASE + 2 * i as u64
    }

    pub fn agent_actuation(i: usize) -> u64 {
        AGENT_BASE + 2 * i as u64 + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

pub trait Environment: Sync {
    type Episode: Send;

    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    /// Maximum number of actions per episode.
    fn horizon(&self) -> usize;
    /// Starts an episode; returns it with the first observation.
    fn reset(&self, seed: u64) -> Result<(Self::Episode, Vec<f64>)>;
    /// Applies one (already clamped) action.
    fn step(&self, episode: &mut Self::Episode, action: &[f64]) -> Result<Transition>;
    /// Task success of a finished episode.
    fn success(&self, episode: &Self::Episode) -> bool;
}
