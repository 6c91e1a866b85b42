//! Low-level and task rewards, each returned with its components.

use super::{block_ends, dist, TaskInstance, TaskKind, Thresholds, RewardWeights};
use crate::policy::{f_goal_space, Goal};
use crate::world::{AgentState, WorldState};

/// `−w_up` while the torso is below the upright threshold, else 0.
pub fn upright_reward(agent: &AgentState, weights: &RewardWeights, thresholds: &Thresholds) -> f64 {
    if agent.z_proxy < thresholds.upright_height {
        -weights.upright
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowLevelReward {
    pub distance: f64,
    pub upright: f64,
    pub heading: f64,
    pub bonus: f64,
}

impl LowLevelReward {
    pub fn total(&self) -> f64 {
        -self.distance + self.upright + self.heading + self.bonus
    }
}

/// Reward for the transition `s → s'` towards the world-frame `goal`.
/// Only `s'` enters the current terms; `s` is kept for shaping variants.
pub fn low_level_reward(
    _s: &AgentState,
    s_next: &AgentState,
    goal: &Goal,
    weights: &RewardWeights,
    thresholds: &Thresholds,
) -> LowLevelReward {
    let p = f_goal_space(s_next);
    let g = goal.as_array();
    let distance = dist(p, g);
    let heading = if distance > 0.0 {
        let h = s_next.heading();
        weights.heading * ((g[0] - p[0]) * h[0] + (g[1] - p[1]) * h[1]) / distance
    } else {
        0.0
    };
    LowLevelReward {
        distance,
        upright: upright_reward(s_next, weights, thresholds),
        heading,
        bonus: if distance < thresholds.goal_radius { weights.bonus } else { 0.0 },
    }
}

/// Components of a task reward; `total` is their signed sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TaskReward {
    /// Sum of the (positive) distances entering with a minus sign.
    pub distance: f64,
    pub bonus: f64,
    /// Non-positive block-proximity penalty (Avoid only).
    pub penalty: f64,
    pub upright: f64,
    /// Heading alignment (low-level goal task only).
    pub heading: f64,
}

impl TaskReward {
    pub fn total(&self) -> f64 {
        -self.distance + self.bonus + self.penalty + self.upright + self.heading
    }
}

pub fn avoid_reward(world: &WorldState, task: &TaskInstance) -> TaskReward {
    let (w, th) = (&task.spec.weights, &task.spec.thresholds);
    let agent = &world.agents[0];
    let d_target = dist(agent.position(), task.targets[0]);
    let d_block = dist(agent.position(), world.blocks[0].position());
    TaskReward {
        distance: d_target,
        bonus: if d_target < th.target_radius { w.bonus } else { 0.0 },
        penalty: if d_block < th.avoid_block_radius { -w.penalty } else { 0.0 },
        upright: upright_reward(agent, w, th),
        heading: 0.0,
    }
}

pub fn push_reward(world: &WorldState, task: &TaskInstance) -> TaskReward {
    let (w, th) = (&task.spec.weights, &task.spec.thresholds);
    let agent = &world.agents[0];
    let block = world.blocks[0].position();
    let d_block_target = dist(block, task.targets[0]);
    TaskReward {
        distance: dist(agent.position(), block) + d_block_target,
        bonus: if d_block_target < th.target_radius { w.bonus } else { 0.0 },
        penalty: 0.0,
        upright: upright_reward(agent, w, th),
        heading: 0.0,
    }
}

pub fn coordinate_reward(world: &WorldState, task: &TaskInstance) -> TaskReward {
    let (w, th) = (&task.spec.weights, &task.spec.thresholds);
    let ends = block_ends(&world.blocks[0]);
    let d1 = dist(ends[0], task.targets[0]);
    let d2 = dist(ends[1], task.targets[1]);
    TaskReward {
        distance: d1 + d2,
        bonus: if d1 < th.coordinate_radius && d2 < th.coordinate_radius { w.bonus } else { 0.0 },
        penalty: 0.0,
        upright: world.agents.iter().map(|a| upright_reward(a, w, th)).sum(),
        heading: 0.0,
    }
}

/// Task reward of `world` for any task kind. For the low-level kind the goal
/// is `targets[0]`.
pub fn task_reward(world: &WorldState, task: &TaskInstance) -> TaskReward {
    match task.spec.kind {
        TaskKind::Avoid => avoid_reward(world, task),
        TaskKind::Push => push_reward(world, task),
        TaskKind::Coordinate => coordinate_reward(world, task),
        TaskKind::LowLevelGoal => {
            let a = &world.agents[0];
            let [gx, gy] = task.targets[0];
            let r = low_level_reward(a, a, &Goal::new(gx, gy), &task.spec.weights, &task.spec.thresholds);
            TaskReward {
                distance: r.distance,
                bonus: r.bonus,
                penalty: 0.0,
                upright: r.upright,
                heading: r.heading,
            }
        }
    }
}
