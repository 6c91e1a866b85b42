//! Low-level goal reaching and the Avoid / Push / Coordinate tasks.

mod init;
mod observe;
mod reward;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use init::{
    avoid_block_radius, fixed_eval_init, init_avoid, init_coordinate, init_push, init_task, low_level_goal_from,
    sample_low_level_goal, EvalVariant, TaskSetup,
};
pub use observe::{
    observation_dim, success, task_observation, torso_position_slots, EpisodeTrace, TraceFrame, AGENT_OBS_DIM,
};
pub use reward::{
    avoid_reward, coordinate_reward, low_level_reward, push_reward, task_reward, upright_reward, LowLevelReward,
    TaskReward,
};

use crate::error::Error;

/// Footprint of the Avoid/Push block (0.6 m × 0.6 m).
pub const SQUARE_BLOCK_HALF_EXTENTS: (f64, f64) = (0.3, 0.3);
/// Footprint of the Coordinate block (0.3 m × 1.4 m), long axis along local y.
pub const LONG_BLOCK_HALF_EXTENTS: (f64, f64) = (0.15, 0.7);
pub const SQUARE_BLOCK_MASS: f64 = 4.0;
pub const LONG_BLOCK_MASS: f64 = 8.0;
/// Distance of each tracked block end from the block centre, along the long axis.
pub const BLOCK_END_OFFSET: f64 = 0.55;
/// Lateral spacing of the two Coordinate agents.
pub const COORDINATE_AGENT_SPACING: f64 = 1.2;

pub const LOW_LEVEL_HORIZON: usize = 40;
pub const TASK_HORIZON: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    #[serde(rename = "low-level")]
    LowLevelGoal,
    Avoid,
    Push,
    Coordinate,
}

impl TaskKind {
    pub const MANIPULATION: [TaskKind; 3] = [TaskKind::Avoid, TaskKind::Push, TaskKind::Coordinate];

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::LowLevelGoal => "low-level",
            TaskKind::Avoid => "avoid",
            TaskKind::Push => "push",
            TaskKind::Coordinate => "coordinate",
        }
    }

    pub fn n_agents(&self) -> usize {
        match self {
            TaskKind::Coordinate => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low-level" => Ok(TaskKind::LowLevelGoal),
            "avoid" => Ok(TaskKind::Avoid),
            "push" => Ok(TaskKind::Push),
            "coordinate" => Ok(TaskKind::Coordinate),
            other => Err(Error::config(format!(
                "unknown task '{other}' (expected low-level, avoid, push or coordinate)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    /// Goal / target bonus.
    pub bonus: f64,
    /// Avoid penalty for being near the block.
    pub penalty: f64,
    pub upright: f64,
    pub heading: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            bonus: 10.0,
            penalty: 10.0,
            upright: 5.0,
            heading: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub goal_radius: f64,
    pub target_radius: f64,
    pub avoid_block_radius: f64,
    pub coordinate_radius: f64,
    /// Torso height below which the upright penalty applies.
    pub upright_height: f64,
    /// Largest block displacement still counted as "not moved" for Avoid.
    pub block_moved_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            goal_radius: 0.5,
            target_radius: 0.5,
            avoid_block_radius: 0.5,
            coordinate_radius: 0.3,
            upright_height: 0.2,
            block_moved_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub n_agents: usize,
    pub horizon: usize,
    pub weights: RewardWeights,
    pub thresholds: Thresholds,
}

impl TaskSpec {
    pub fn new(kind: TaskKind) -> Self {
        Self::with(kind, RewardWeights::default(), Thresholds::default())
    }

    pub fn with(kind: TaskKind, weights: RewardWeights, thresholds: Thresholds) -> Self {
        let horizon = if kind == TaskKind::LowLevelGoal {
            LOW_LEVEL_HORIZON
        } else {
            TASK_HORIZON
        };
        Self {
            kind,
            n_agents: kind.n_agents(),
            horizon,
            weights,
            thresholds,
        }
    }
}

/// Per-episode task data not stored in the world: targets and start poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub spec: TaskSpec,
    /// Avoid/Push/low-level: one target. Coordinate: one per block end.
    pub targets: Vec<[f64; 2]>,
}

/// World-frame positions of the two tracked block ends.
pub fn block_ends(block: &crate::world::BlockState) -> [[f64; 2]; 2] {
    [block.to_world([0.0, BLOCK_END_OFFSET]), block.to_world([0.0, -BLOCK_END_OFFSET])]
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizons_and_agent_counts() {
        assert_eq!(TaskSpec::new(TaskKind::LowLevelGoal).horizon, 40);
        for k in TaskKind::MANIPULATION {
            assert_eq!(TaskSpec::new(k).horizon, 200);
        }
        assert_eq!(TaskSpec::new(TaskKind::Coordinate).n_agents, 2);
        assert_eq!(TaskSpec::new(TaskKind::Push).n_agents, 1);
    }

    #[test]
    fn task_names_round_trip() {
        for k in [TaskKind::LowLevelGoal, TaskKind::Avoid, TaskKind::Push, TaskKind::Coordinate] {
            assert_eq!(k.name().parse::<TaskKind>().unwrap(), k);
        }
        assert!("walk".parse::<TaskKind>().is_err());
    }
}
