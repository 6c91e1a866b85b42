//! Episode initializations: randomized simulation starts and the fixed
//! evaluation layouts.

use std::f64::consts::PI;

use rand::Rng;

use super::{
    dist, TaskInstance, TaskKind, TaskSpec, COORDINATE_AGENT_SPACING, LONG_BLOCK_HALF_EXTENTS, LONG_BLOCK_MASS,
    SQUARE_BLOCK_HALF_EXTENTS, SQUARE_BLOCK_MASS, BLOCK_END_OFFSET,
};
use crate::error::{Error, Result};
use crate::policy::Goal;
use crate::world::{AgentState, BlockState, DynamicsParams, HeightField, WorldState};

const MAX_RESAMPLES: usize = 100;
/// Minimum agent/block centre distance accepted by the Push initializer.
const PUSH_MIN_CLEARANCE: f64 = 0.5;
/// Coordinate block centre, straight ahead of the agent pair.
const COORDINATE_BLOCK_AHEAD: f64 = 1.0;

/// Agents, blocks and targets of a fresh episode, before dynamics are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSetup {
    pub agents: Vec<AgentState>,
    pub blocks: Vec<BlockState>,
    pub instance: TaskInstance,
}

impl TaskSetup {
    pub fn into_world(self, terrain: HeightField, params: Vec<DynamicsParams>) -> Result<(WorldState, TaskInstance)> {
        let mut world = WorldState::new(self.agents, self.blocks, terrain, params)?;
        if !world.blocks.is_empty() {
            world.resolve_contacts()?;
        }
        Ok((world, self.instance))
    }

    /// Nominal dynamics on flat ground.
    pub fn into_nominal_world(self) -> Result<(WorldState, TaskInstance)> {
        let n = self.agents.len();
        self.into_world(HeightField::flat(), vec![DynamicsParams::default(); n])
    }
}

fn polar(r: f64, theta: f64) -> [f64; 2] {
    [r * theta.cos(), r * theta.sin()]
}

/// Goal `(u cos v, u sin v)` in the spawn frame.
pub fn low_level_goal_from(u: f64, v: f64) -> Goal {
    let [gx, gy] = polar(u, v);
    Goal::new(gx, gy)
}

/// Low-level training goal: `u ~ U(1, 2)`, `v ~ U(-0.5, 0.5)`.
pub fn sample_low_level_goal<R: Rng + ?Sized>(rng: &mut R) -> Goal {
    let u = rng.random_range(1.0..=2.0);
    let v = rng.random_range(-0.5..=0.5);
    low_level_goal_from(u, v)
}

pub fn avoid_block_radius(target_radius: f64, draw: f64) -> f64 {
    (target_radius * draw).max(0.6)
}

fn sample_target<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    (rng.random_range(1.5..=2.5), rng.random_range(-1.0..=1.0))
}

fn single_agent() -> Vec<AgentState> {
    vec![AgentState::at(0.0, 0.0, 0.0)]
}

pub fn init_avoid<R: Rng + ?Sized>(rng: &mut R) -> TaskSetup {
    let (r_t, theta_t) = sample_target(rng);
    let r_b = avoid_block_radius(r_t, rng.random_range(0.3..=0.8));
    let theta_b = theta_t + rng.random_range(-0.5..=0.5);
    let [bx, by] = polar(r_b, theta_b);
    TaskSetup {
        agents: single_agent(),
        blocks: vec![BlockState::new(bx, by, 0.0, SQUARE_BLOCK_HALF_EXTENTS, SQUARE_BLOCK_MASS)],
        instance: TaskInstance {
            spec: TaskSpec::new(TaskKind::Avoid),
            targets: vec![polar(r_t, theta_t)],
        },
    }
}

pub fn init_push<R: Rng + ?Sized>(rng: &mut R) -> Result<TaskSetup> {
    for _ in 0..MAX_RESAMPLES {
        let (r_t, theta_t) = sample_target(rng);
        let r_b = rng.random_range(0.6..=1.2);
        let theta_b = rng.random_range(PI / 3.0..=5.0 * PI / 3.0);
        let target = polar(r_t, theta_t);
        let offset = polar(r_b, theta_b);
        let block = [target[0] + offset[0], target[1] + offset[1]];
        if dist(block, [0.0, 0.0]) < PUSH_MIN_CLEARANCE {
            continue;
        }
        return Ok(TaskSetup {
            agents: single_agent(),
            blocks: vec![BlockState::new(block[0], block[1], 0.0, SQUARE_BLOCK_HALF_EXTENTS, SQUARE_BLOCK_MASS)],
            instance: TaskInstance {
                spec: TaskSpec::new(TaskKind::Push),
                targets: vec![target],
            },
        });
    }
    Err(Error::numerical(format!("push initialization failed after {MAX_RESAMPLES} resamples")))
}

fn coordinate_agents() -> Vec<AgentState> {
    let half = 0.5 * COORDINATE_AGENT_SPACING;
    vec![AgentState::at(0.0, half, 0.0), AgentState::at(0.0, -half, 0.0)]
}

/// Horizontal long block ahead of two side-by-side agents; targets for the
/// block ends at `r_T`/`θ_T` from the block centre, separated along `θ_B`.
pub fn init_coordinate<R: Rng + ?Sized>(rng: &mut R) -> TaskSetup {
    let r_t = rng.random_range(1.0..=1.5);
    let theta_t = rng.random_range(-1.0..=1.0);
    let theta_b = theta_t + PI / 2.0 + rng.random_range(-0.5..=0.5);
    let c = [COORDINATE_BLOCK_AHEAD + r_t * theta_t.cos(), r_t * theta_t.sin()];
    let e = polar(BLOCK_END_OFFSET, theta_b);
    TaskSetup {
        agents: coordinate_agents(),
        blocks: vec![BlockState::new(COORDINATE_BLOCK_AHEAD, 0.0, 0.0, LONG_BLOCK_HALF_EXTENTS, LONG_BLOCK_MASS)],
        instance: TaskInstance {
            spec: TaskSpec::new(TaskKind::Coordinate),
            targets: vec![[c[0] + e[0], c[1] + e[1]], [c[0] - e[0], c[1] - e[1]]],
        },
    }
}

/// Randomized start for `kind`. The low-level task gets a goal in `targets[0]`.
pub fn init_task<R: Rng + ?Sized>(kind: TaskKind, rng: &mut R) -> Result<TaskSetup> {
    match kind {
        TaskKind::LowLevelGoal => {
            let g = sample_low_level_goal(rng);
            Ok(TaskSetup {
                agents: single_agent(),
                blocks: vec![],
                instance: TaskInstance {
                    spec: TaskSpec::new(kind),
                    targets: vec![g.as_array()],
                },
            })
        }
        TaskKind::Avoid => Ok(init_avoid(rng)),
        TaskKind::Push => init_push(rng),
        TaskKind::Coordinate => Ok(init_coordinate(rng)),
    }
}

/// Target side for the fixed Avoid/Push layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalVariant {
    Left,
    Right,
}

impl EvalVariant {
    /// Alternates left/right across attempts.
    pub fn for_attempt(attempt: usize) -> Self {
        if attempt % 2 == 0 {
            EvalVariant::Left
        } else {
            EvalVariant::Right
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EvalVariant::Left => "left",
            EvalVariant::Right => "right",
        }
    }

    fn sign(&self) -> f64 {
        match self {
            EvalVariant::Left => 1.0,
            EvalVariant::Right => -1.0,
        }
    }
}

/// Fixed evaluation layouts: box 1 m ahead of an agent facing +x with the
/// target at `(2, ±0.5)`; for Coordinate a horizontal long box in front of
/// both agents with targets 1.5 m further forward.
pub fn fixed_eval_init(kind: TaskKind, variant: EvalVariant) -> TaskSetup {
    match kind {
        TaskKind::Avoid | TaskKind::Push => TaskSetup {
            agents: single_agent(),
            blocks: vec![BlockState::new(1.0, 0.0, 0.0, SQUARE_BLOCK_HALF_EXTENTS, SQUARE_BLOCK_MASS)],
            instance: TaskInstance {
                spec: TaskSpec::new(kind),
                targets: vec![[2.0, 0.5 * variant.sign()]],
            },
        },
        TaskKind::Coordinate => {
            let block = BlockState::new(COORDINATE_BLOCK_AHEAD, 0.0, 0.0, LONG_BLOCK_HALF_EXTENTS, LONG_BLOCK_MASS);
            let targets = super::block_ends(&block).map(|e| [e[0] + 1.5, e[1]]).to_vec();
            TaskSetup {
                agents: coordinate_agents(),
                blocks: vec![block],
                instance: TaskInstance {
                    spec: TaskSpec::new(kind),
                    targets,
                },
            }
        }
        TaskKind::LowLevelGoal => TaskSetup {
            agents: single_agent(),
            blocks: vec![],
            instance: TaskInstance {
                spec: TaskSpec::new(kind),
                targets: vec![[2.0, 0.0]],
            },
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn ks(samples: &mut [f64], low: f64, high: f64) -> f64 {
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = ((x - low) / (high - low)).clamp(0.0, 1.0);
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn low_level_goal_bounds_and_law() {
        let mut rng = stream(1);
        let mut radii = Vec::new();
        for _ in 0..10_000 {
            let g = sample_low_level_goal(&mut rng);
            let r = g.gx.hypot(g.gy);
            let b = g.gy.atan2(g.gx);
            assert!((1.0 - 1e-12..=2.0 + 1e-12).contains(&r));
            assert!((-0.5 - 1e-12..=0.5 + 1e-12).contains(&b));
            radii.push(r);
        }
        assert!(ks(&mut radii, 1.0, 2.0) < 0.02);
        assert_eq!(low_level_goal_from(1.0, 0.0), Goal::new(1.0, 0.0));
    }

    #[test]
    fn avoid_block_radius_floor() {
        assert_eq!(avoid_block_radius(1.5, 0.3), 0.6);
        assert!((avoid_block_radius(2.0, 0.8) - 1.6).abs() < 1e-12);
    }

    #[test]
    fn push_never_spawns_block_on_agent() {
        let mut rng = stream(2);
        for _ in 0..10_000 {
            let s = init_push(&mut rng).unwrap();
            assert!(dist(s.blocks[0].position(), s.agents[0].position()) >= 0.5);
        }
    }

    #[test]
    fn coordinate_targets_are_one_point_one_apart() {
        let mut rng = stream(3);
        for _ in 0..1000 {
            let s = init_coordinate(&mut rng);
            let t = &s.instance.targets;
            assert!((dist(t[0], t[1]) - 1.1).abs() < 1e-12);
        }
    }

    #[test]
    fn initialization_laws_match_uniforms() {
        // Recover r_T, θ_T from the Avoid target and r_B, θ_B from the Push block.
        let mut rng = stream(4);
        let (mut rt, mut tt, mut rb, mut tb) = (vec![], vec![], vec![], vec![]);
        for _ in 0..10_000 {
            let s = init_avoid(&mut rng);
            let t = s.instance.targets[0];
            rt.push(t[0].hypot(t[1]));
            tt.push(t[1].atan2(t[0]));
        }
        let mut rng = stream(5);
        for _ in 0..10_000 {
            // Without the clearance resample, which would bias the law.
            let (r_t, theta_t) = sample_target(&mut rng);
            let r_b: f64 = rng.random_range(0.6..=1.2);
            let theta_b: f64 = rng.random_range(PI / 3.0..=5.0 * PI / 3.0);
            let target = polar(r_t, theta_t);
            let block = [target[0] + r_b * theta_b.cos(), target[1] + r_b * theta_b.sin()];
            let d = [block[0] - target[0], block[1] - target[1]];
            rb.push(d[0].hypot(d[1]));
            tb.push(d[1].atan2(d[0]).rem_euclid(2.0 * PI));
        }
        assert!(ks(&mut rt, 1.5, 2.5) < 0.02);
        assert!(ks(&mut tt, -1.0, 1.0) < 0.02);
        assert!(ks(&mut rb, 0.6, 1.2) < 0.02);
        assert!(ks(&mut tb, PI / 3.0, 5.0 * PI / 3.0) < 0.02);
    }

    #[test]
    fn fixed_layouts() {
        let s = fixed_eval_init(TaskKind::Avoid, EvalVariant::Left);
        assert_eq!(s.instance.targets[0], [2.0, 0.5]);
        assert_eq!(fixed_eval_init(TaskKind::Push, EvalVariant::Right).instance.targets[0], [2.0, -0.5]);
        assert_eq!(s.blocks[0].position(), [1.0, 0.0]);
        let c = fixed_eval_init(TaskKind::Coordinate, EvalVariant::Left);
        let ends = super::super::block_ends(&c.blocks[0]);
        for (e, t) in ends.iter().zip(&c.instance.targets) {
            assert!((t[0] - e[0] - 1.5).abs() < 1e-12 && (t[1] - e[1]).abs() < 1e-12);
        }
    }
}
