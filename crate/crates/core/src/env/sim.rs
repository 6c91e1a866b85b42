use serde::{Deserialize, Serialize};

use super::streams;
use crate::error::{Error, Result};
use crate::eval::RealProxy;
use crate::randomization::{
    apply_sticky, sample_episode_params, sample_object_dims, RandomizationConfig, WrenchSchedule,
};
use crate::rng::{substream, Stream};
use crate::tasks::{task_observation, task_reward, EpisodeTrace, TaskInstance, TaskReward, TaskSetup};
use crate::world::{world_step, DynamicsParams, HeightField, JointVector, WorldState, NUM_JOINTS};

/// Where an episode's physics come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsSource {
    /// Nominal parameters, flat ground, no actuation noise.
    Nominal,
    /// Fresh sample per episode from the configured ranges.
    Randomized(RandomizationConfig),
    /// The fixed held-out environment.
    Proxy(RealProxy),
}

impl DynamicsSource {
    pub fn name(&self) -> &'static str {
        match self {
            DynamicsSource::Nominal => "nominal",
            DynamicsSource::Randomized(_) => "randomized",
            DynamicsSource::Proxy(_) => "proxy",
        }
    }

    /// Samples the dynamics of one episode with `n_agents` agents.
    pub fn realize(&self, n_agents: usize, seed: u64) -> Result<EpisodeDynamics> {
        match self {
            DynamicsSource::Nominal => Ok(EpisodeDynamics {
                params: vec![DynamicsParams::default(); n_agents],
                terrain: HeightField::flat(),
                noise: RandomizationConfig::disabled(),
            }),
            DynamicsSource::Randomized(config) => {
                let mut params = Vec::with_capacity(n_agents);
                let mut terrain = None;
                for i in 0..n_agents {
                    let mut rng = substream(seed, streams::agent_dynamics(i));
                    let (p, hf) = sample_episode_params(config, &mut rng)?;
                    params.push(p);
                    terrain.get_or_insert(hf);
                }
                Ok(EpisodeDynamics {
                    params,
                    terrain: terrain.unwrap_or_else(HeightField::flat),
                    noise: config.clone(),
                })
            }
            DynamicsSource::Proxy(proxy) => Ok(EpisodeDynamics {
                params: vec![proxy.params; n_agents],
                terrain: proxy.terrain.clone(),
                noise: proxy.noise_config(),
            }),
        }
    }
}

/// One episode's realized physics plus the noise processes acting on it.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeDynamics {
    pub params: Vec<DynamicsParams>,
    pub terrain: HeightField,
    /// Sticky actions, wrenches and object-dimension flags and ranges.
    pub noise: RandomizationConfig,
}

/// A running task episode: world state, actuation noise and trace.
#[derive(Debug, Clone)]
pub struct SimEpisode {
    pub world: WorldState,
    pub task: TaskInstance,
    pub trace: EpisodeTrace,
    noise: RandomizationConfig,
    prev_actions: Vec<Option<JointVector>>,
    wrenches: Vec<WrenchSchedule>,
    actuation_rngs: Vec<Stream>,
}

impl SimEpisode {
    pub fn new(mut setup: TaskSetup, dynamics: EpisodeDynamics, seed: u64) -> Result<Self> {
        let n = setup.agents.len();
        if dynamics.params.len() != n {
            return Err(Error::config(format!(
                "dynamics for {} agents given to a {n}-agent task",
                dynamics.params.len()
            )));
        }
        let mut object_rng = substream(seed, streams::OBJECT_DIMS);
        for block in &mut setup.blocks {
            block.half_extents = sample_object_dims(block.half_extents, &mut object_rng, &dynamics.noise);
        }
        let (world, task) = setup.into_world(dynamics.terrain, dynamics.params)?;
        Ok(Self {
            trace: EpisodeTrace::start(&world),
            world,
            task,
            noise: dynamics.noise,
            prev_actions: vec![None; n],
            wrenches: vec![WrenchSchedule::new(); n],
            actuation_rngs: (0..n).map(|i| substream(seed, streams::agent_actuation(i))).collect(),
        })
    }

    pub fn n_agents(&self) -> usize {
        self.world.agents.len()
    }

    /// Steps the world with one joint command per agent. Commands pass
    /// through sticky-action and wrench noise; fallen agents get a zero command.
    pub fn step(&mut self, actions: &[JointVector]) -> Result<()> {
        let n = self.n_agents();
        if actions.len() != n {
            return Err(Error::config(format!("expected {n} joint commands, got {}", actions.len())));
        }
        let sticky = self.noise.effective_sticky_prob();
        let step = self.world.step;
        let mut applied = Vec::with_capacity(n);
        let mut wrenches = Vec::with_capacity(n);
        for i in 0..n {
            let rng = &mut self.actuation_rngs[i];
            let command = if self.world.agents[i].fallen {
                [0.0; NUM_JOINTS]
            } else {
                actions[i]
            };
            let chosen = apply_sticky(&command, self.prev_actions[i].as_ref().map(|a| &a[..]), rng, sticky);
            let mut a = [0.0; NUM_JOINTS];
            a.copy_from_slice(&chosen);
            self.prev_actions[i] = Some(a);
            applied.push(a);
            wrenches.push(self.wrenches[i].sample_wrench(step, rng, &self.noise));
        }
        self.world = world_step(&self.world, &applied, &wrenches)?;
        self.trace.record(&self.world);
        Ok(())
    }

    pub fn observation(&self) -> Vec<f64> {
        task_observation(&self.world, &self.task)
    }

    pub fn reward(&self) -> TaskReward {
        task_reward(&self.world, &self.task)
    }

    pub fn success(&self) -> bool {
        crate::tasks::success(&self.task, &self.trace)
    }
}

/// Copies a 12-dim slice into a joint vector.
pub(crate) fn joint_vector(a: &[f64]) -> Result<JointVector> {
    if a.len() != NUM_JOINTS {
        return Err(Error::config(format!("expected {NUM_JOINTS} joint values, got {}", a.len())));
    }
    let mut v = [0.0; NUM_JOINTS];
    v.copy_from_slice(a);
    Ok(v)
}
