//! Planar legged-agent surrogate.
//!
//! Twelve position-controlled joints (4 legs × abduction, flexion, knee)
//! drive a kinematic torso through a rectified stance-gated thrust model.
//! Leg order is front-left, front-right, rear-left, rear-right.

use serde::{Deserialize, Serialize};

use super::terrain::HeightField;
use crate::error::{ensure_finite, Error, Result};

pub const NUM_LEGS: usize = 4;
pub const JOINTS_PER_LEG: usize = 3;
pub const NUM_JOINTS: usize = NUM_LEGS * JOINTS_PER_LEG;

pub const ABDUCTION: usize = 0;
pub const FLEXION: usize = 1;
pub const KNEE: usize = 2;

const LEFT_LEGS: [usize; 2] = [0, 2];
const RIGHT_LEGS: [usize; 2] = [1, 3];

pub type JointVector = [f64; NUM_JOINTS];

pub const fn joint_index(leg: usize, joint: usize) -> usize {
    leg * JOINTS_PER_LEG + joint
}

/// Fixed constants of the surrogate model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConstants {
    pub dt: f64,
    pub q_max: f64,
    /// Nominal torso height.
    pub z0: f64,
    /// Forward gain, metres per rad of rectified flexion velocity.
    pub k_forward: f64,
    pub k_turn: f64,
    pub k_lateral: f64,
    /// Per-leg thrust (and abduction drive) saturates at this joint speed, rad/s.
    pub thrust_saturation: f64,
    pub qdot_ref: f64,
    pub force_ref: f64,
    pub speed_ref: f64,
    pub slope_stability_weight: f64,
    pub slope_speed_weight: f64,
    /// Radius of gyration used to turn torso torque into yaw rate.
    pub gyration_radius: f64,
    /// Disc footprint used for block contact.
    pub agent_radius: f64,
}

impl Default for SurrogateConstants {
    fn default() -> Self {
        Self {
            dt: 0.1,
            q_max: 1.5,
            z0: 0.3,
            k_forward: 1.2,
            k_turn: 2.0,
            k_lateral: 0.3,
            thrust_saturation: 1.0,
            qdot_ref: 8.0,
            force_ref: 40.0,
            speed_ref: 2.0,
            slope_stability_weight: 4.0,
            slope_speed_weight: 2.0,
            gyration_radius: 0.3,
            agent_radius: 0.3,
        }
    }
}

/// Per-agent dynamics realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    pub joint_damping: f64,
    pub joint_friction: f64,
    pub actuator_gain: f64,
    pub actuator_bias: f64,
    pub total_mass: f64,
    pub surface_friction: f64,
    /// Constant force along the torso's left axis, N.
    pub lateral_bias_force: f64,
}

impl DynamicsParams {
    pub fn new(
        joint_damping: f64,
        joint_friction: f64,
        actuator_gain: f64,
        total_mass: f64,
        surface_friction: f64,
    ) -> Self {
        Self {
            joint_damping,
            joint_friction,
            actuator_gain,
            actuator_bias: -actuator_gain,
            total_mass,
            surface_friction,
            lateral_bias_force: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let magnitudes = [
            self.joint_damping,
            self.joint_friction,
            self.actuator_gain,
            self.total_mass,
            self.surface_friction,
        ];
        if magnitudes.iter().any(|v| !v.is_finite() || *v < 0.0) || !self.lateral_bias_force.is_finite() {
            return Err(Error::config(format!("invalid dynamics parameters {self:?}")));
        }
        if self.total_mass <= 0.0 {
            return Err(Error::config("total_mass must be positive"));
        }
        if self.actuator_bias != -self.actuator_gain {
            return Err(Error::config("actuator_bias must equal -actuator_gain"));
        }
        Ok(())
    }
}

impl Default for DynamicsParams {
    /// Midpoints of the low-level randomization ranges.
    fn default() -> Self {
        Self::new(1.0, 0.003, 5.0, 1.8, 1.0)
    }
}

/// Force and torque applied to the torso, world frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalWrench {
    pub fx: f64,
    pub fy: f64,
    pub torque: f64,
}

impl ExternalWrench {
    pub fn force_norm(&self) -> f64 {
        self.fx.hypot(self.fy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub z_proxy: f64,
    pub q: JointVector,
    pub qdot: JointVector,
    pub fallen: bool,
}

impl AgentState {
    /// Standing at rest at `(x, y)` facing `yaw`.
    pub fn at(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw,
            z_proxy: SurrogateConstants::default().z0,
            q: [0.0; NUM_JOINTS],
            qdot: [0.0; NUM_JOINTS],
            fallen: false,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn heading(&self) -> [f64; 2] {
        [self.yaw.cos(), self.yaw.sin()]
    }

    fn check_finite(&self) -> Result<()> {
        ensure_finite(&[self.x, self.y, self.yaw, self.z_proxy], "agent pose")?;
        ensure_finite(&self.q, "joint positions")?;
        ensure_finite(&self.qdot, "joint velocities")
    }
}

/// Intermediate quantities of one agent step, exposed for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub v_forward: f64,
    pub v_lateral: f64,
    pub omega: f64,
    pub stability: f64,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Advances one agent by `constants.dt`.
pub fn step_agent(
    state: &AgentState,
    action: &[f64],
    params: &DynamicsParams,
    terrain: &HeightField,
    wrench: &ExternalWrench,
) -> Result<AgentState> {
    step_agent_with(state, action, params, terrain, wrench, &SurrogateConstants::default()).map(|(s, _)| s)
}

pub fn step_agent_with(
    state: &AgentState,
    action: &[f64],
    params: &DynamicsParams,
    terrain: &HeightField,
    wrench: &ExternalWrench,
    k: &SurrogateConstants,
) -> Result<(AgentState, StepDiagnostics)> {
    if action.len() != NUM_JOINTS {
        return Err(Error::config(format!(
            "agent action must have {NUM_JOINTS} components, got {}",
            action.len()
        )));
    }
    ensure_finite(action, "agent action")?;
    ensure_finite(&[wrench.fx, wrench.fy, wrench.torque], "external wrench")?;
    state.check_finite()?;
    if state.fallen {
        let diag = StepDiagnostics {
            v_forward: 0.0,
            v_lateral: 0.0,
            omega: 0.0,
            stability: -1.0,
        };
        return Ok((state.clone(), diag));
    }
    let dt = k.dt;

    let mut next = state.clone();
    for j in 0..NUM_JOINTS {
        let a = action[j].clamp(-1.0, 1.0);
        let qddot = params.actuator_gain * (a - state.q[j])
            - params.joint_damping * state.qdot[j]
            - params.joint_friction * sign(state.qdot[j]);
        let mut qdot = state.qdot[j] + qddot * dt;
        let mut q = state.q[j] + qdot * dt;
        if q.abs() > k.q_max {
            q = q.clamp(-k.q_max, k.q_max);
            qdot = 0.0;
        }
        next.q[j] = q;
        next.qdot[j] = qdot;
    }

    let mut thrust = [0.0; NUM_LEGS];
    let mut lateral = [0.0; NUM_LEGS];
    for leg in 0..NUM_LEGS {
        if next.q[joint_index(leg, KNEE)] > 0.0 {
            let sat = k.thrust_saturation;
            thrust[leg] = (-next.qdot[joint_index(leg, FLEXION)]).clamp(0.0, sat);
            lateral[leg] = next.qdot[joint_index(leg, ABDUCTION)].clamp(-sat, sat);
        }
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let left: f64 = LEFT_LEGS.iter().map(|&l| thrust[l]).sum::<f64>() / LEFT_LEGS.len() as f64;
    let right: f64 = RIGHT_LEGS.iter().map(|&l| thrust[l]).sum::<f64>() / RIGHT_LEGS.len() as f64;

    let (_, slope) = terrain.sample(state.x, state.y);
    let slope_mag = slope[0].hypot(slope[1]);
    let traction = params.surface_friction * (1.0 - k.slope_speed_weight * slope_mag).max(0.0);

    let v_forward = k.k_forward * mean(&thrust) * traction;
    let v_lateral = k.k_lateral * mean(&lateral) * traction;
    let omega = k.k_turn * (left - right) * traction;

    let (sin_yaw, cos_yaw) = state.yaw.sin_cos();
    let bias_x = -sin_yaw * params.lateral_bias_force;
    let bias_y = cos_yaw * params.lateral_bias_force;
    let dvx = (wrench.fx + bias_x) * dt / params.total_mass;
    let dvy = (wrench.fy + bias_y) * dt / params.total_mass;
    let inertia = params.total_mass * k.gyration_radius * k.gyration_radius;
    let domega = wrench.torque * dt / inertia;

    next.x = state.x + (v_forward * cos_yaw - v_lateral * sin_yaw + dvx) * dt;
    next.y = state.y + (v_forward * sin_yaw + v_lateral * cos_yaw + dvy) * dt;
    next.yaw = state.yaw + (omega + domega) * dt;

    let max_qdot = next.qdot.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let stability = 1.0
        - 0.5 * max_qdot / k.qdot_ref
        - k.slope_stability_weight * slope_mag
        - wrench.force_norm() / k.force_ref
        - v_forward.hypot(v_lateral) / k.speed_ref;
    next.z_proxy = k.z0 * stability.clamp(0.0, 1.0);
    next.fallen = stability < 0.0;

    Ok((
        next,
        StepDiagnostics {
            v_forward,
            v_lateral,
            omega,
            stability,
        },
    ))
}

/// Open-loop trot used as a reference gait: flexion joints follow antiphase
/// sinusoids and knees are extended only during each leg's backward stroke.
pub fn scripted_trot(step: usize, period: usize) -> JointVector {
    let mut a = [0.0; NUM_JOINTS];
    for leg in 0..NUM_LEGS {
        let phase_offset = if leg == 0 || leg == 3 { 0.0 } else { std::f64::consts::PI };
        let phase = 2.0 * std::f64::consts::PI * step as f64 / period as f64 + phase_offset;
        a[joint_index(leg, FLEXION)] = phase.sin();
        a[joint_index(leg, KNEE)] = if phase.cos() < 0.0 { 1.0 } else { -1.0 };
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_action_at_rest_is_fixed_point() {
        let s = AgentState::at(0.3, -0.2, 0.7);
        let next = step_agent(&s, &[0.0; 12], &DynamicsParams::default(), &HeightField::flat(), &ExternalWrench::default()).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn excessive_joint_speed_falls() {
        let mut s = AgentState::at(0.0, 0.0, 0.0);
        s.q[4] = -1.5;
        s.qdot[4] = 20.0;
        let next = step_agent(&s, &[0.0; 12], &DynamicsParams::default(), &HeightField::flat(), &ExternalWrench::default()).unwrap();
        assert!(next.fallen);
        assert_eq!(next.z_proxy, 0.0);
    }

    #[test]
    fn fallen_agent_does_not_move() {
        let mut s = AgentState::at(1.0, 1.0, 0.0);
        s.fallen = true;
        let next = step_agent(&s, &[1.0; 12], &DynamicsParams::default(), &HeightField::flat(), &ExternalWrench { fx: 5.0, fy: 0.0, torque: 0.0 }).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn non_finite_action_is_rejected() {
        let s = AgentState::at(0.0, 0.0, 0.0);
        let mut a = [0.0; 12];
        a[3] = f64::NAN;
        let r = step_agent(&s, &a, &DynamicsParams::default(), &HeightField::flat(), &ExternalWrench::default());
        assert!(matches!(r, Err(Error::Numerical(_))));
        let r = step_agent(&s, &a[..5], &DynamicsParams::default(), &HeightField::flat(), &ExternalWrench::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn joints_stay_within_limits() {
        let mut s = AgentState::at(0.0, 0.0, 0.0);
        let params = DynamicsParams::new(0.0, 0.0, 6.0, 1.8, 1.0);
        for t in 0..200 {
            let a = if (t / 7) % 2 == 0 { [1.0; 12] } else { [-1.0; 12] };
            s = step_agent(&s, &a, &params, &HeightField::flat(), &ExternalWrench::default()).unwrap();
            s.fallen = false;
            assert!(s.q.iter().all(|q| q.abs() <= 1.5));
            assert!((0.0..=0.3).contains(&s.z_proxy));
        }
    }

    #[test]
    fn scripted_trot_moves_forward() {
        let mut s = AgentState::at(0.0, 0.0, 0.0);
        for t in 0..40 {
            s = step_agent(&s, &scripted_trot(t, 20), &DynamicsParams::default(), &HeightField::flat(), &ExternalWrench::default()).unwrap();
            assert!(!s.fallen);
        }
        // Regression constant recorded from this simulation.
        assert!(s.x > 0.5, "displacement {}", s.x);
        assert!((s.x - SCRIPTED_TROT_DISPLACEMENT).abs() < 1e-9, "displacement {}", s.x);
    }

    const SCRIPTED_TROT_DISPLACEMENT: f64 = 2.035_843_376_613_912_3;

    #[test]
    fn wrench_shifts_agent_by_a_few_centimetres() {
        let s = AgentState::at(0.0, 0.0, 0.0);
        let w = ExternalWrench { fx: 10.0, fy: 0.0, torque: 0.0 };
        let next = step_agent(&s, &[0.0; 12], &DynamicsParams::default(), &HeightField::flat(), &w).unwrap();
        assert!((next.x - 10.0 * 0.1 / 1.8 * 0.1).abs() < 1e-12);
    }
}
