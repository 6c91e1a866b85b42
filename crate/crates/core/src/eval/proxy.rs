//! The held-out "real-proxy" environment.

use serde::{Deserialize, Serialize};

use crate::randomization::{RandomizationConfig, RandomizationFlags, Range};
use crate::rng::{substream, Stream};
use crate::world::{DynamicsParams, HeightField};

pub const PROXY_MASS: f64 = 2.2;
pub const PROXY_DAMPING: f64 = 1.2;
pub const PROXY_GAIN: f64 = 3.5;
pub const PROXY_SURFACE_FRICTION: f64 = 0.7;
pub const PROXY_JOINT_FRICTION: f64 = 0.008;
pub const PROXY_HFIELD_AMPLITUDE: f64 = 0.06;
pub const PROXY_LATERAL_BIAS: f64 = 3.0;
pub const PROXY_STICKY_PROB: f64 = 0.1;

/// Fixed dynamics outside every training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealProxy {
    pub seed: u64,
    pub params: DynamicsParams,
    pub terrain: HeightField,
    pub sticky_prob: f64,
}

impl RealProxy {
    /// Noise processes active in the proxy: sticky actions only.
    pub fn noise_config(&self) -> RandomizationConfig {
        let mut flags = RandomizationFlags::none();
        flags.sticky_actions = true;
        RandomizationConfig {
            sticky_prob: self.sticky_prob,
            ..RandomizationConfig::with_flags(flags)
        }
    }

    /// Proxy quantities that fall inside the matching training range or value
    /// set. Empty for a valid proxy.
    pub fn overlaps(&self, training: &RandomizationConfig) -> Vec<String> {
        let p = &self.params;
        let checks: [(&str, f64, Range); 6] = [
            ("total_mass", p.total_mass, training.mass_range),
            ("joint_damping", p.joint_damping, training.damping_range),
            ("actuator_gain", p.actuator_gain, training.gain_range),
            ("surface_friction", p.surface_friction, training.surface_friction_range),
            ("joint_friction", p.joint_friction, training.joint_friction_range),
            ("hfield_amplitude", self.terrain.amplitude(), training.hfield_amplitude_range),
        ];
        let mut out: Vec<String> = checks
            .iter()
            .filter(|(_, v, r)| r.contains(*v))
            .map(|(name, v, r)| format!("{name} = {v} lies in [{}, {}]", r.low, r.high))
            .collect();
        // Training sees sticky probability 0 (disabled) or `sticky_prob`, and no lateral bias.
        if self.sticky_prob == 0.0 || self.sticky_prob == training.sticky_prob {
            out.push(format!("sticky_prob = {} is used in training", self.sticky_prob));
        }
        if p.lateral_bias_force == 0.0 {
            out.push("lateral_bias_force = 0 is used in training".into());
        }
        out
    }
}

fn terrain_stream(seed: u64) -> Stream {
    substream(seed, 0x5052_4f58)
}

/// Builds the proxy; its height field is generated from `seed`.
pub fn build_real_proxy(seed: u64) -> RealProxy {
    let mut params = DynamicsParams::new(PROXY_DAMPING, PROXY_JOINT_FRICTION, PROXY_GAIN, PROXY_MASS, PROXY_SURFACE_FRICTION);
    params.lateral_bias_force = PROXY_LATERAL_BIAS;
    let proxy = RealProxy {
        seed,
        params,
        terrain: HeightField::random(PROXY_HFIELD_AMPLITUDE, &mut terrain_stream(seed)),
        sticky_prob: PROXY_STICKY_PROB,
    };
    let overlaps = proxy.overlaps(&RandomizationConfig::default());
    assert!(overlaps.is_empty(), "proxy overlaps the training distribution: {overlaps:?}");
    proxy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{scripted_trot, step_agent, AgentState, ExternalWrench};

    #[test]
    fn proxy_is_outside_training_ranges() {
        let proxy = build_real_proxy(0);
        assert!(proxy.overlaps(&RandomizationConfig::default()).is_empty());
        let mut inside = proxy.clone();
        inside.params.total_mass = 1.8;
        assert_eq!(inside.overlaps(&RandomizationConfig::default()).len(), 1);
        assert_eq!(proxy.params.actuator_bias, -proxy.params.actuator_gain);
    }

    #[test]
    fn same_seed_same_terrain() {
        assert_eq!(build_real_proxy(3).terrain, build_real_proxy(3).terrain);
        assert_ne!(build_real_proxy(3).terrain, build_real_proxy(4).terrain);
    }

    fn trot_distance(params: &DynamicsParams, terrain: &HeightField) -> f64 {
        let mut s = AgentState::at(0.0, 0.0, 0.0);
        for t in 0..40 {
            s = step_agent(&s, &scripted_trot(t, 20), params, terrain, &ExternalWrench::default()).unwrap();
        }
        s.x
    }

    #[test]
    fn scripted_trot_slows_in_proxy() {
        let nominal = trot_distance(&DynamicsParams::default(), &HeightField::flat());
        for seed in 0..5 {
            let proxy = build_real_proxy(seed);
            let d = trot_distance(&proxy.params, &proxy.terrain);
            assert!(d <= 0.9 * nominal, "seed {seed}: proxy {d} vs nominal {nominal}");
        }
    }
}
