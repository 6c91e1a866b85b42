use rand::Rng;

use super::{streams, Environment, Transition};
use crate::error::{Error, Result};
use crate::rng::substream;

/// A 2-D point mass steered towards a random target; a cheap, smooth task
/// for exercising the trainer.
#[derive(Debug, Clone)]
pub struct PointMassEnv {
    pub horizon: usize,
    pub dt: f64,
}

impl Default for PointMassEnv {
    fn default() -> Self {
        Self { horizon: 20, dt: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct PointMassEpisode {
    pub position: [f64; 2],
    pub target: [f64; 2],
    pub t: usize,
}

impl PointMassEpisode {
    fn obs(&self) -> Vec<f64> {
        vec![self.target[0] - self.position[0], self.target[1] - self.position[1]]
    }

    fn distance(&self) -> f64 {
        (self.target[0] - self.position[0]).hypot(self.target[1] - self.position[1])
    }
}

impl Environment for PointMassEnv {
    type Episode = PointMassEpisode;

    fn obs_dim(&self) -> usize {
        2
    }

    fn act_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&self, seed: u64) -> Result<(PointMassEpisode, Vec<f64>)> {
        let mut rng = substream(seed, streams::INIT);
        let episode = PointMassEpisode {
            position: [0.0, 0.0],
            target: [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)],
            t: 0,
        };
        let obs = episode.obs();
        Ok((episode, obs))
    }

    fn step(&self, episode: &mut PointMassEpisode, action: &[f64]) -> Result<Transition> {
        if action.len() != 2 {
            return Err(Error::config(format!("point mass takes 2 actions, got {}", action.len())));
        }
        for k in 0..2 {
            episode.position[k] += self.dt * action[k].clamp(-1.0, 1.0);
        }
        episode.t += 1;
        Ok(Transition {
            obs: episode.obs(),
            reward: -episode.distance(),
            done: episode.t >= self.horizon,
        })
    }

    fn success(&self, episode: &PointMassEpisode) -> bool {
        episode.distance() < 0.1
    }
}
