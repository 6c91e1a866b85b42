//! Deterministic planar surrogate physics for legged agents and pushable blocks.

pub mod agent;
pub mod block;
pub mod terrain;

use serde::{Deserialize, Serialize};

pub use agent::{
    scripted_trot, step_agent, step_agent_with, AgentState, DynamicsParams, ExternalWrench, JointVector,
    StepDiagnostics, SurrogateConstants, NUM_JOINTS,
};
pub use block::{disc_contact, penetration, resolve_push, BlockState, Contact};
pub use terrain::HeightField;

use crate::error::{Error, Result};

/// Gauss-Seidel sweeps over agent/block pairs before residual overlap is
/// removed by moving agents instead.
const CONTACT_SWEEPS: usize = 8;
const CONTACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub agents: Vec<AgentState>,
    pub blocks: Vec<BlockState>,
    pub terrain: HeightField,
    /// One entry per agent.
    pub params: Vec<DynamicsParams>,
    pub step: u64,
    #[serde(default)]
    pub constants: SurrogateConstants,
}

impl WorldState {
    pub fn new(agents: Vec<AgentState>, blocks: Vec<BlockState>, terrain: HeightField, params: Vec<DynamicsParams>) -> Result<Self> {
        if agents.len() != params.len() {
            return Err(Error::config(format!(
                "{} agents but {} dynamics parameter sets",
                agents.len(),
                params.len()
            )));
        }
        for b in &blocks {
            b.validate()?;
        }
        for p in &params {
            p.validate()?;
        }
        Ok(Self {
            agents,
            blocks,
            terrain,
            params,
            step: 0,
            constants: SurrogateConstants::default(),
        })
    }

    pub fn max_penetration(&self) -> f64 {
        let r = self.constants.agent_radius;
        self.agents
            .iter()
            .flat_map(|a| self.blocks.iter().map(move |b| penetration(a.position(), r, b)))
            .fold(0.0, f64::max)
    }

    /// Pushes blocks out of agent footprints in agent-index order.
    pub fn resolve_contacts(&mut self) -> Result<()> {
        let r = self.constants.agent_radius;
        let dt = self.constants.dt;
        for _ in 0..CONTACT_SWEEPS {
            for a in &self.agents {
                for b in self.blocks.iter_mut() {
                    *b = resolve_push(a, r, b, dt)?;
                }
            }
            if self.max_penetration() <= CONTACT_TOLERANCE {
                return Ok(());
            }
        }
        // Blocks pinned between agents: back the agents off instead.
        for a in self.agents.iter_mut() {
            for b in &self.blocks {
                if let Some(c) = disc_contact(a.position(), r, b) {
                    a.x += c.normal[0] * c.depth;
                    a.y += c.normal[1] * c.depth;
                }
            }
        }
        Ok(())
    }
}

/// Steps every agent, then resolves agent/block contacts.
pub fn world_step(world: &WorldState, actions: &[JointVector], wrenches: &[ExternalWrench]) -> Result<WorldState> {
    let n = world.agents.len();
    if actions.len() != n || wrenches.len() != n {
        return Err(Error::config(format!(
            "world has {n} agents but got {} actions and {} wrenches",
            actions.len(),
            wrenches.len()
        )));
    }
    let mut next = world.clone();
    for (i, agent) in next.agents.iter_mut().enumerate() {
        if agent.fallen {
            continue;
        }
        let (stepped, _) = step_agent_with(agent, &actions[i], &world.params[i], &world.terrain, &wrenches[i], &world.constants)?;
        *agent = stepped;
    }
    if !next.blocks.is_empty() {
        next.resolve_contacts()?;
    }
    next.step += 1;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(agent: AgentState, blocks: Vec<BlockState>) -> WorldState {
        WorldState::new(vec![agent], blocks, HeightField::flat(), vec![DynamicsParams::default()]).unwrap()
    }

    #[test]
    fn single_agent_matches_step_agent() {
        let mut agent = AgentState::at(0.2, 0.1, 0.3);
        agent.qdot[1] = -0.8;
        agent.q[2] = 0.4;
        let w = single(agent.clone(), vec![]);
        let a = scripted_trot(3, 20);
        let wr = ExternalWrench { fx: 1.0, fy: -2.0, torque: 0.1 };
        let next = world_step(&w, &[a], &[wr]).unwrap();
        let direct = step_agent(&agent, &a, &DynamicsParams::default(), &HeightField::flat(), &wr).unwrap();
        assert_eq!(next.agents[0], direct);
        assert_eq!(next.step, 1);
    }

    #[test]
    fn distant_agents_do_not_interact() {
        let a0 = AgentState::at(-3.0, 0.0, 0.0);
        let a1 = AgentState::at(3.0, 1.0, 1.0);
        let p = DynamicsParams::default();
        let w = WorldState::new(vec![a0.clone(), a1.clone()], vec![], HeightField::flat(), vec![p, p]).unwrap();
        let acts = [scripted_trot(1, 20), scripted_trot(7, 16)];
        let wr = [ExternalWrench::default(), ExternalWrench { fx: 3.0, fy: 0.0, torque: 0.0 }];
        let next = world_step(&w, &acts, &wr).unwrap();
        assert_eq!(next.agents[0], step_agent(&a0, &acts[0], &p, &w.terrain, &wr[0]).unwrap());
        assert_eq!(next.agents[1], step_agent(&a1, &acts[1], &p, &w.terrain, &wr[1]).unwrap());
    }

    #[test]
    fn action_count_mismatch_is_a_config_error() {
        let w = single(AgentState::at(0.0, 0.0, 0.0), vec![]);
        assert!(matches!(world_step(&w, &[], &[]), Err(Error::Config(_))));
    }

    #[test]
    fn forward_gait_pushes_block_along_heading() {
        let block = BlockState::new(0.62, 0.0, 0.0, (0.3, 0.3), 4.0);
        let mut w = single(AgentState::at(0.0, 0.0, 0.0), vec![block]);
        for t in 0..60 {
            w = world_step(&w, &[scripted_trot(t, 20)], &[ExternalWrench::default()]).unwrap();
            assert!(w.max_penetration() <= 1e-6);
        }
        assert!(w.blocks[0].x > 0.62 + 0.1, "block at {}", w.blocks[0].x);
    }

    #[test]
    fn rest_world_is_a_fixed_point() {
        let block = BlockState::new(2.0, 0.0, 0.3, (0.3, 0.3), 4.0);
        let w = single(AgentState::at(0.0, 0.0, 0.0), vec![block]);
        let next = world_step(&w, &[[0.0; 12]], &[ExternalWrench::default()]).unwrap();
        assert_eq!(next.agents, w.agents);
        assert_eq!(next.blocks, w.blocks);
    }

    #[test]
    fn pinned_block_is_resolved_by_backing_agents_off() {
        let block = BlockState::new(0.0, 0.0, 0.0, (0.15, 0.7), 8.0);
        let p = DynamicsParams::default();
        let agents = vec![AgentState::at(-0.4, 0.0, 0.0), AgentState::at(0.4, 0.0, std::f64::consts::PI)];
        let mut w = WorldState::new(agents, vec![block], HeightField::flat(), vec![p, p]).unwrap();
        w.resolve_contacts().unwrap();
        assert!(w.max_penetration() <= 1e-6);
    }
}
