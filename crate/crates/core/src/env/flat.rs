use rand::Rng;

use super::sim::{joint_vector, DynamicsSource, SimEpisode};
use super::{streams, Environment, Transition};
use crate::error::Result;
use crate::rng::{substream, Stream};
use crate::tasks::{init_task, observation_dim, torso_position_slots, TaskKind, TASK_HORIZON};
use crate::world::NUM_JOINTS;

/// Non-hierarchical baseline: joint commands for every agent at every step.
#[derive(Debug, Clone)]
pub struct FlatEnv {
    pub kind: TaskKind,
    pub source: DynamicsSource,
    /// Half-width of the uniform noise added to torso `x, y` observations (0 disables).
    pub torso_noise: f64,
}

#[derive(Debug, Clone)]
pub struct FlatEpisode {
    pub sim: SimEpisode,
    noise_rng: Stream,
}

impl FlatEnv {
    pub fn new(kind: TaskKind, source: DynamicsSource, torso_noise: f64) -> Self {
        Self {
            kind,
            source,
            torso_noise,
        }
    }

    fn observe(&self, episode: &mut FlatEpisode) -> Vec<f64> {
        let mut obs = episode.sim.observation();
        if self.torso_noise > 0.0 {
            for slot in torso_position_slots(self.kind) {
                for k in slot..slot + 2 {
                    obs[k] += episode.noise_rng.random_range(-self.torso_noise..=self.torso_noise);
                }
            }
        }
        obs
    }
}

impl Environment for FlatEnv {
    type Episode = FlatEpisode;

    fn obs_dim(&self) -> usize {
        observation_dim(self.kind)
    }

    fn act_dim(&self) -> usize {
        NUM_JOINTS * self.kind.n_agents()
    }

    fn horizon(&self) -> usize {
        TASK_HORIZON
    }

    fn reset(&self, seed: u64) -> Result<(FlatEpisode, Vec<f64>)> {
        let setup = init_task(self.kind, &mut substream(seed, streams::INIT))?;
        let sim = SimEpisode::new(setup, self.source.realize(self.kind.n_agents(), seed)?, seed)?;
        let mut episode = FlatEpisode {
            sim,
            noise_rng: substream(seed, streams::OBSERVATION_NOISE),
        };
        let obs = self.observe(&mut episode);
        Ok((episode, obs))
    }

    fn step(&self, episode: &mut FlatEpisode, action: &[f64]) -> Result<Transition> {
        let actions = action
            .chunks(NUM_JOINTS)
            .map(joint_vector)
            .collect::<Result<Vec<_>>>()?;
        episode.sim.step(&actions)?;
        let reward = episode.sim.reward().total();
        Ok(Transition {
            obs: self.observe(episode),
            reward,
            done: episode.sim.world.step as usize >= self.horizon(),
        })
    }

    fn success(&self, episode: &FlatEpisode) -> bool {
        episode.sim.success()
    }
}
