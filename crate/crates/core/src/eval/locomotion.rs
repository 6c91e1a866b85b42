//! Forward-walking robustness test for a frozen low-level policy.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::MeanStderr;
use crate::env::{streams, DynamicsSource, SimEpisode};
use crate::error::{Error, Result};
use crate::policy::{body_to_world, mask_low_level_obs, Goal, MlpPolicy, LOW_LEVEL_ACT_DIM, LOW_LEVEL_OBS_DIM};
use crate::rng::{derive_seed, substream};
use crate::tasks::{TaskInstance, TaskKind, TaskSetup, TaskSpec};
use crate::world::AgentState;

pub const LOCOMOTION_STEPS: usize = 50;
/// The goal sits this far ahead of the torso and is re-anchored every
/// `LOCOMOTION_REANCHOR` steps.
pub const LOCOMOTION_GOAL_AHEAD: f64 = 2.0;
pub const LOCOMOTION_REANCHOR: usize = 10;
/// Half-width of the square of start positions.
const START_SPREAD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocomotionTrial {
    /// Displacement along the initial heading, metres.
    pub distance: f64,
    pub fell: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocomotionResult {
    /// Outcomes per model, in model order.
    pub trials: Vec<Vec<LocomotionTrial>>,
    pub distance: MeanStderr,
    pub fall_rate: MeanStderr,
}

fn start_pose(seed: u64) -> AgentState {
    let mut rng = substream(seed, streams::INIT);
    let x = rng.random_range(-START_SPREAD..=START_SPREAD);
    let y = rng.random_range(-START_SPREAD..=START_SPREAD);
    let yaw = rng.random_range(-PI..PI);
    AgentState::at(x, y, yaw)
}

fn forward_goal(agent: &AgentState) -> Goal {
    let [gx, gy] = body_to_world(agent, [LOCOMOTION_GOAL_AHEAD, 0.0]);
    Goal::new(gx, gy)
}

/// One deterministic trial from a seeded start pose.
pub fn locomotion_trial(policy: &MlpPolicy, source: &DynamicsSource, seed: u64) -> Result<LocomotionTrial> {
    if policy.obs_dim() != LOW_LEVEL_OBS_DIM || policy.act_dim() != LOW_LEVEL_ACT_DIM {
        return Err(Error::config(format!(
            "locomotion test needs a {LOW_LEVEL_OBS_DIM}→{LOW_LEVEL_ACT_DIM} low-level policy, got {}→{}",
            policy.obs_dim(),
            policy.act_dim()
        )));
    }
    let start = start_pose(seed);
    let mut goal = forward_goal(&start);
    let setup = TaskSetup {
        agents: vec![start.clone()],
        blocks: Vec::new(),
        instance: TaskInstance {
            spec: TaskSpec::new(TaskKind::LowLevelGoal),
            targets: vec![goal.as_array()],
        },
    };
    let mut episode = SimEpisode::new(setup, source.realize(1, seed)?, seed)?;
    for t in 0..LOCOMOTION_STEPS {
        let agent = &episode.world.agents[0];
        if t > 0 && t % LOCOMOTION_REANCHOR == 0 {
            goal = forward_goal(agent);
        }
        let mean = policy.mean(&mask_low_level_obs(agent, &goal))?;
        let mut action = [0.0; LOW_LEVEL_ACT_DIM];
        for (a, m) in action.iter_mut().zip(&mean) {
            *a = m.clamp(-1.0, 1.0);
        }
        episode.step(&[action])?;
    }
    let end = &episode.world.agents[0];
    let [hx, hy] = start.heading();
    Ok(LocomotionTrial {
        distance: (end.x - start.x) * hx + (end.y - start.y) * hy,
        fell: end.fallen,
    })
}

/// Runs `trials_per_model` paired trials for every policy. Trial `j` of each
/// model uses seed `derive_seed(seed, j)`, so models face the same starts.
pub fn eval_locomotion(
    policies: &[&MlpPolicy],
    source: &DynamicsSource,
    trials_per_model: usize,
    seed: u64,
) -> Result<LocomotionResult> {
    let trials = policies
        .iter()
        .map(|p| {
            (0..trials_per_model as u64)
                .into_par_iter()
                .map(|j| locomotion_trial(p, source, derive_seed(seed, j)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let per_model = |f: &dyn Fn(&LocomotionTrial) -> f64| -> Vec<f64> {
        trials
            .iter()
            .map(|ts| ts.iter().map(f).sum::<f64>() / ts.len().max(1) as f64)
            .collect()
    };
    let distance = MeanStderr::of(&per_model(&|t| t.distance));
    let fall_rate = MeanStderr::of(&per_model(&|t| if t.fell { 1.0 } else { 0.0 }));
    Ok(LocomotionResult {
        trials,
        distance,
        fall_rate,
    })
}
