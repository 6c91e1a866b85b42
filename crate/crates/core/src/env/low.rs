use super::sim::{joint_vector, DynamicsSource, SimEpisode};
use super::{streams, Environment, Transition};
use crate::error::Result;
use crate::policy::{mask_low_level_obs, Goal, LOW_LEVEL_ACT_DIM, LOW_LEVEL_OBS_DIM};
use crate::rng::substream;
use crate::tasks::{init_task, low_level_reward, RewardWeights, TaskKind, LOW_LEVEL_HORIZON};

/// Goal reaching from a fresh spawn; terminates when the agent falls.
#[derive(Debug, Clone)]
pub struct LowLevelEnv {
    pub source: DynamicsSource,
    pub horizon: usize,
    pub weights: RewardWeights,
}

impl LowLevelEnv {
    pub fn new(source: DynamicsSource) -> Self {
        Self {
            source,
            horizon: LOW_LEVEL_HORIZON,
            weights: RewardWeights::default(),
        }
    }

    fn goal(episode: &SimEpisode) -> Goal {
        let [gx, gy] = episode.task.targets[0];
        Goal::new(gx, gy)
    }

    fn obs(episode: &SimEpisode) -> Vec<f64> {
        mask_low_level_obs(&episode.world.agents[0], &Self::goal(episode))
    }
}

impl Environment for LowLevelEnv {
    type Episode = SimEpisode;

    fn obs_dim(&self) -> usize {
        LOW_LEVEL_OBS_DIM
    }

    fn act_dim(&self) -> usize {
        LOW_LEVEL_ACT_DIM
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&self, seed: u64) -> Result<(SimEpisode, Vec<f64>)> {
        let mut setup = init_task(TaskKind::LowLevelGoal, &mut substream(seed, streams::INIT))?;
        setup.instance.spec.weights = self.weights;
        let episode = SimEpisode::new(setup, self.source.realize(1, seed)?, seed)?;
        let obs = Self::obs(&episode);
        Ok((episode, obs))
    }

    fn step(&self, episode: &mut SimEpisode, action: &[f64]) -> Result<Transition> {
        let before = episode.world.agents[0].clone();
        episode.step(&[joint_vector(action)?])?;
        let after = &episode.world.agents[0];
        let spec = &episode.task.spec;
        let reward = low_level_reward(&before, after, &Self::goal(episode), &spec.weights, &spec.thresholds).total();
        let done = after.fallen || episode.world.step as usize >= self.horizon;
        Ok(Transition {
            obs: Self::obs(episode),
            reward,
            done,
        })
    }

    /// Goal-bonus criterion on the final state.
    fn success(&self, episode: &SimEpisode) -> bool {
        episode.success()
    }
}
