//! Goal space, the polar high-level action map and low-level observations.

use serde::{Deserialize, Serialize};

use crate::world::{AgentState, NUM_JOINTS};

/// Masked torso slots (3 positional + 3 rotational degrees of freedom).
pub const MASKED_POSE_SLOTS: usize = 6;
pub const LOW_LEVEL_OBS_DIM: usize = 2 * NUM_JOINTS + MASKED_POSE_SLOTS + 2;
pub const LOW_LEVEL_ACT_DIM: usize = NUM_JOINTS;

/// World-frame target point for the low level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub gx: f64,
    pub gy: f64,
}

impl Goal {
    pub fn new(gx: f64, gy: f64) -> Self {
        Self { gx, gy }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.gx, self.gy]
    }
}

/// Goal-space projection: the torso's planar coordinates.
pub fn f_goal_space(agent: &AgentState) -> [f64; 2] {
    [agent.x, agent.y]
}

/// Polar map from one agent's pair of high-level action components to a
/// body-frame goal offset: radius `0.5 + 0.3·a0`, bearing `0.2·a1`.
pub fn h_map(a_hi_pair: [f64; 2]) -> [f64; 2] {
    let a0 = a_hi_pair[0].clamp(-1.0, 1.0);
    let a1 = a_hi_pair[1].clamp(-1.0, 1.0);
    let u = 0.5 + 0.3 * a0;
    let v = 0.2 * a1;
    [u * v.cos(), u * v.sin()]
}

pub fn body_to_world(agent: &AgentState, offset: [f64; 2]) -> [f64; 2] {
    let (s, c) = agent.yaw.sin_cos();
    [agent.x + c * offset[0] - s * offset[1], agent.y + s * offset[0] + c * offset[1]]
}

pub fn world_to_body(agent: &AgentState, point: [f64; 2]) -> [f64; 2] {
    let (s, c) = agent.yaw.sin_cos();
    let dx = point[0] - agent.x;
    let dy = point[1] - agent.y;
    [c * dx + s * dy, -s * dx + c * dy]
}

/// World-frame goal for one agent from its slice of the high-level action.
pub fn goal_from_high_level(agent: &AgentState, a_hi_pair: [f64; 2]) -> Goal {
    let [gx, gy] = body_to_world(agent, h_map(a_hi_pair));
    Goal { gx, gy }
}

/// Low-level observation `[q, qdot, 0×6, goal_body]`; the torso pose never
/// enters, so the policy only ever sees relative goals.
pub fn mask_low_level_obs(agent: &AgentState, goal: &Goal) -> Vec<f64> {
    let mut obs = Vec::with_capacity(LOW_LEVEL_OBS_DIM);
    obs.extend_from_slice(&agent.q);
    obs.extend_from_slice(&agent.qdot);
    obs.extend_from_slice(&[0.0; MASKED_POSE_SLOTS]);
    obs.extend_from_slice(&world_to_body(agent, goal.as_array()));
    obs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn goal_space_projects_position() {
        assert_eq!(f_goal_space(&AgentState::at(0.0, 0.0, 0.0)), [0.0, 0.0]);
        assert_eq!(f_goal_space(&AgentState::at(1.5, -2.0, 2.3)), [1.5, -2.0]);
        let mut rng = stream(1);
        let mut a = AgentState::at(0.4, 0.1, 0.2);
        let before = f_goal_space(&a);
        let d = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        a.x += d[0];
        a.y += d[1];
        let after = f_goal_space(&a);
        assert!((after[0] - before[0] - d[0]).abs() < 1e-12 && (after[1] - before[1] - d[1]).abs() < 1e-12);
    }

    #[test]
    fn h_map_examples() {
        assert_eq!(h_map([0.0, 0.0]), [0.5, 0.0]);
        let g = h_map([1.0, 0.0]);
        assert!((g[0] - 0.8).abs() < 1e-15 && g[1] == 0.0);
        let g = h_map([0.0, 1.0]);
        assert!((g[0] - 0.49003).abs() < 1e-5 && (g[1] - 0.09933).abs() < 1e-5, "{g:?}");
        // Out-of-range input is clamped, not rejected.
        assert_eq!(h_map([5.0, 0.0]), h_map([1.0, 0.0]));
    }

    #[test]
    fn masked_obs_layout() {
        let mut a = AgentState::at(2.0, -1.0, 0.8);
        a.q[0] = 0.3;
        a.qdot[11] = -0.2;
        let obs = mask_low_level_obs(&a, &Goal::new(2.0, -1.0));
        assert_eq!(obs.len(), LOW_LEVEL_OBS_DIM);
        assert_eq!(obs[0], 0.3);
        assert_eq!(obs[23], -0.2);
        assert!(obs[24..30].iter().all(|&v| v == 0.0));
        assert!(obs[30].abs() < 1e-15 && obs[31].abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn h_map_range(a0 in -1.0f64..=1.0, a1 in -1.0f64..=1.0) {
            let g = h_map([a0, a1]);
            let u = g[0].hypot(g[1]);
            let v = g[1].atan2(g[0]);
            prop_assert!((0.2 - 1e-12..=0.8 + 1e-12).contains(&u));
            prop_assert!((-0.2 - 1e-12..=0.2 + 1e-12).contains(&v));
        }

        #[test]
        fn masked_obs_is_invariant_to_rigid_motion(
            x in -5.0f64..5.0, y in -5.0f64..5.0, yaw in -3.0f64..3.0,
            gx in -1.0f64..1.0, gy in -1.0f64..1.0,
            tx in -5.0f64..5.0, ty in -5.0f64..5.0, rot in -3.0f64..3.0,
        ) {
            let mut a = AgentState::at(x, y, yaw);
            a.q[3] = 0.7;
            a.qdot[5] = -1.1;
            let g = Goal::new(x + gx, y + gy);
            let obs = mask_low_level_obs(&a, &g);

            let (s, c) = rot.sin_cos();
            let move_pt = |p: [f64; 2]| [c * p[0] - s * p[1] + tx, s * p[0] + c * p[1] + ty];
            let mut b = a.clone();
            let p = move_pt([a.x, a.y]);
            b.x = p[0];
            b.y = p[1];
            b.yaw = a.yaw + rot;
            let gp = move_pt([g.gx, g.gy]);
            let obs2 = mask_low_level_obs(&b, &Goal::new(gp[0], gp[1]));
            for (u, v) in obs.iter().zip(&obs2) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
