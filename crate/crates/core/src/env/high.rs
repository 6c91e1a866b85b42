use std::sync::Arc;

use super::sim::{joint_vector, DynamicsSource, SimEpisode};
use super::{streams, Environment, Transition};
use crate::error::{Error, Result};
use crate::policy::{goal_from_high_level, mask_low_level_obs, Goal, MlpPolicy, LOW_LEVEL_OBS_DIM};
use crate::randomization::{perturb_high_level_action, RandomizationConfig};
use crate::rng::{substream, Stream};
use crate::tasks::{init_task, observation_dim, TaskKind, TASK_HORIZON};

/// Result of one high-level decision: `c` low-level steps under fixed goals.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutcome {
    /// Goals handed to each agent's low level (world frame).
    pub goals: Vec<Goal>,
    /// Task reward after each low-level step.
    pub rewards: Vec<f64>,
    /// Discounted sum `Σ γ^i r_i` over the decision.
    pub r_hi: f64,
}

/// Executes one high-level action: maps each agent's pair of components to a
/// goal, then runs the frozen low level (mean actions) for up to `c` steps.
pub fn run_decision(sim: &mut SimEpisode, a_hi: &[f64], low: &MlpPolicy, c: usize, gamma: f64) -> Result<DecisionOutcome> {
    let n = sim.n_agents();
    if a_hi.len() != 2 * n {
        return Err(Error::config(format!("high-level action needs {} values, got {}", 2 * n, a_hi.len())));
    }
    if low.obs_dim() != LOW_LEVEL_OBS_DIM {
        return Err(Error::config(format!(
            "low-level policy expects {} observations, the hierarchy provides {LOW_LEVEL_OBS_DIM}",
            low.obs_dim()
        )));
    }
    let goals: Vec<Goal> = sim
        .world
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| goal_from_high_level(a, [a_hi[2 * i], a_hi[2 * i + 1]]))
        .collect();
    let mut rewards = Vec::with_capacity(c);
    let mut r_hi = 0.0;
    let mut discount = 1.0;
    for _ in 0..c {
        if sim.world.step as usize >= sim.task.spec.horizon {
            break;
        }
        let mut actions = Vec::with_capacity(n);
        for (agent, goal) in sim.world.agents.iter().zip(&goals) {
            let mean = low.mean(&mask_low_level_obs(agent, goal))?;
            let clamped: Vec<f64> = mean.iter().map(|m| m.clamp(-1.0, 1.0)).collect();
            actions.push(joint_vector(&clamped)?);
        }
        sim.step(&actions)?;
        let r = sim.reward().total();
        r_hi += discount * r;
        discount *= gamma;
        rewards.push(r);
    }
    Ok(DecisionOutcome { goals, rewards, r_hi })
}

/// Task episodes seen by the high level: one action every `c` steps.
#[derive(Debug, Clone)]
pub struct HighLevelEnv {
    pub kind: TaskKind,
    pub source: DynamicsSource,
    pub low: Arc<MlpPolicy>,
    /// High-level action noise and object-dimension randomization (by flag).
    pub noise: RandomizationConfig,
    pub c: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct HighLevelEpisode {
    pub sim: SimEpisode,
    noise_rng: Stream,
}

impl HighLevelEnv {
    pub fn new(kind: TaskKind, source: DynamicsSource, low: Arc<MlpPolicy>, noise: RandomizationConfig) -> Self {
        Self {
            kind,
            source,
            low,
            noise,
            c: crate::policy::LOW_STEPS_PER_GOAL,
            gamma: 0.99,
        }
    }
}

impl Environment for HighLevelEnv {
    type Episode = HighLevelEpisode;

    fn obs_dim(&self) -> usize {
        observation_dim(self.kind)
    }

    fn act_dim(&self) -> usize {
        2 * self.kind.n_agents()
    }

    fn horizon(&self) -> usize {
        TASK_HORIZON.div_ceil(self.c)
    }

    fn reset(&self, seed: u64) -> Result<(HighLevelEpisode, Vec<f64>)> {
        let setup = init_task(self.kind, &mut substream(seed, streams::INIT))?;
        let mut dynamics = self.source.realize(self.kind.n_agents(), seed)?;
        dynamics.noise.enabled.object_dims = self.noise.enabled.object_dims;
        dynamics.noise.object_dim_scale_range = self.noise.object_dim_scale_range;
        let sim = SimEpisode::new(setup, dynamics, seed)?;
        let obs = sim.observation();
        Ok((
            HighLevelEpisode {
                sim,
                noise_rng: substream(seed, streams::HIGH_LEVEL_NOISE),
            },
            obs,
        ))
    }

    fn step(&self, episode: &mut HighLevelEpisode, action: &[f64]) -> Result<Transition> {
        let a = perturb_high_level_action(action, &mut episode.noise_rng, &self.noise);
        let out = run_decision(&mut episode.sim, &a, &self.low, self.c, self.gamma)?;
        Ok(Transition {
            obs: episode.sim.observation(),
            reward: out.r_hi,
            done: episode.sim.world.step as usize >= episode.sim.task.spec.horizon,
        })
    }

    fn success(&self, episode: &HighLevelEpisode) -> bool {
        episode.sim.success()
    }
}
