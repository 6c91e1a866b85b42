//! Task observations, episode traces and success predicates.
//!
//! Observation layouts (all angles as `(cos, sin)` pairs):
//!
//! | task        | layout                                                                 | dim |
//! |-------------|------------------------------------------------------------------------|-----|
//! | low-level   | `[q, qdot, 0×6, goal in body frame]`                                   | 32  |
//! | avoid, push | `agent, target in body frame, block centre in body frame`              | 32  |
//! | coordinate  | `agent₁, agent₂, block yaw, t₁ − end₁, t₂ − end₂, ends in body frame`  | 70  |
//!
//! where `agent = [q, qdot, x, y, cos yaw, sin yaw]` (28 values). For
//! Coordinate, the target-minus-end offsets are world-frame and the last block
//! lists `end₁, end₂` in agent 1's body frame followed by the same for agent 2.

use serde::{Deserialize, Serialize};

use super::{block_ends, dist, TaskInstance, TaskKind};
use crate::policy::{mask_low_level_obs, world_to_body, Goal, LOW_LEVEL_OBS_DIM};
use crate::world::{AgentState, WorldState, NUM_JOINTS};

pub const AGENT_OBS_DIM: usize = 2 * NUM_JOINTS + 4;
/// Offset of the torso `x, y` inside an agent block.
pub const TORSO_XY_OFFSET: usize = 2 * NUM_JOINTS;

pub fn observation_dim(kind: TaskKind) -> usize {
    match kind {
        TaskKind::LowLevelGoal => LOW_LEVEL_OBS_DIM,
        TaskKind::Avoid | TaskKind::Push => AGENT_OBS_DIM + 4,
        TaskKind::Coordinate => 2 * AGENT_OBS_DIM + 2 + 4 + 8,
    }
}

/// Indices of the torso `x` slots for every agent in a task observation
/// (each followed by `y`).
pub fn torso_position_slots(kind: TaskKind) -> Vec<usize> {
    match kind {
        TaskKind::LowLevelGoal => vec![],
        TaskKind::Avoid | TaskKind::Push => vec![TORSO_XY_OFFSET],
        TaskKind::Coordinate => vec![TORSO_XY_OFFSET, AGENT_OBS_DIM + TORSO_XY_OFFSET],
    }
}

fn push_agent(obs: &mut Vec<f64>, a: &AgentState) {
    obs.extend_from_slice(&a.q);
    obs.extend_from_slice(&a.qdot);
    obs.extend_from_slice(&[a.x, a.y, a.yaw.cos(), a.yaw.sin()]);
}

/// Observation of `world` for the task; recomputed from scratch every call.
pub fn task_observation(world: &WorldState, task: &TaskInstance) -> Vec<f64> {
    let kind = task.spec.kind;
    let mut obs = Vec::with_capacity(observation_dim(kind));
    match kind {
        TaskKind::LowLevelGoal => {
            let [gx, gy] = task.targets[0];
            obs = mask_low_level_obs(&world.agents[0], &Goal::new(gx, gy));
        }
        TaskKind::Avoid | TaskKind::Push => {
            let a = &world.agents[0];
            push_agent(&mut obs, a);
            obs.extend_from_slice(&world_to_body(a, task.targets[0]));
            obs.extend_from_slice(&world_to_body(a, world.blocks[0].position()));
        }
        TaskKind::Coordinate => {
            let block = &world.blocks[0];
            for a in &world.agents {
                push_agent(&mut obs, a);
            }
            obs.extend_from_slice(&[block.yaw.cos(), block.yaw.sin()]);
            let ends = block_ends(block);
            for (e, t) in ends.iter().zip(&task.targets) {
                obs.extend_from_slice(&[t[0] - e[0], t[1] - e[1]]);
            }
            for a in &world.agents {
                for e in &ends {
                    obs.extend_from_slice(&world_to_body(a, *e));
                }
            }
        }
    }
    obs
}

/// Planar poses at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFrame {
    /// `(x, y, yaw)` per agent.
    pub agents: Vec<[f64; 3]>,
    /// `(x, y, yaw)` per block.
    pub blocks: Vec<[f64; 3]>,
}

impl TraceFrame {
    pub fn of(world: &WorldState) -> Self {
        Self {
            agents: world.agents.iter().map(|a| [a.x, a.y, a.yaw]).collect(),
            blocks: world.blocks.iter().map(|b| [b.x, b.y, b.yaw]).collect(),
        }
    }
}

/// Poses of a completed episode; frame 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub frames: Vec<TraceFrame>,
    /// Block footprints, kept for replay export.
    pub block_half_extents: Vec<(f64, f64)>,
}

impl EpisodeTrace {
    pub fn start(world: &WorldState) -> Self {
        Self {
            frames: vec![TraceFrame::of(world)],
            block_half_extents: world.blocks.iter().map(|b| b.half_extents).collect(),
        }
    }

    pub fn record(&mut self, world: &WorldState) {
        self.frames.push(TraceFrame::of(world));
    }
}

fn xy(p: &[f64; 3]) -> [f64; 2] {
    [p[0], p[1]]
}

fn ends_of(pose: &[f64; 3]) -> [[f64; 2]; 2] {
    let b = crate::world::BlockState::new(pose[0], pose[1], pose[2], (1.0, 1.0), 1.0);
    block_ends(&b)
}

/// Success predicate on a completed episode. An empty trace is a failure.
pub fn success(task: &TaskInstance, trace: &EpisodeTrace) -> bool {
    let (Some(first), Some(last)) = (trace.frames.first(), trace.frames.last()) else {
        return false;
    };
    let th = &task.spec.thresholds;
    match task.spec.kind {
        TaskKind::LowLevelGoal => dist(xy(&last.agents[0]), task.targets[0]) < th.goal_radius,
        TaskKind::Avoid => {
            let start = xy(&first.blocks[0]);
            let reached = trace
                .frames
                .iter()
                .any(|f| dist(xy(&f.agents[0]), task.targets[0]) < th.target_radius);
            let max_disp = trace
                .frames
                .iter()
                .map(|f| dist(xy(&f.blocks[0]), start))
                .fold(0.0, f64::max);
            reached && max_disp < th.block_moved_tolerance
        }
        TaskKind::Push => dist(xy(&last.blocks[0]), task.targets[0]) < th.target_radius,
        TaskKind::Coordinate => {
            let ends = ends_of(&last.blocks[0]);
            ends.iter()
                .zip(&task.targets)
                .all(|(e, t)| dist(*e, *t) < th.coordinate_radius)
        }
    }
}
