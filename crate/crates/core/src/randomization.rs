//! Domain-randomization ranges and seeded per-episode sampling.
//!
//! Defaults follow the low-level training listing: joint damping, joint
//! friction loss, total mass, tangential surface friction, actuator gain
//! (with the matching negative bias) and a freshly drawn height field, plus
//! sticky actions, periodic torso wrenches, high-level action noise and
//! object-dimension scaling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{DynamicsParams, ExternalWrench, HeightField};

/// Closed interval `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub low: f64,
    pub high: f64,
}

impl Range {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.low..=self.high).contains(&v)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.low == self.high {
            // Keep stream consumption independent of the range width.
            let _: f64 = rng.random();
            return self.low;
        }
        rng.random_range(self.low..=self.high)
    }

    fn is_valid(&self) -> bool {
        self.low.is_finite() && self.high.is_finite() && self.low <= self.high
    }
}

impl From<[f64; 2]> for Range {
    fn from(v: [f64; 2]) -> Self {
        Range::new(v[0], v[1])
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.low, r.high]
    }
}

/// Which randomizations are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomizationFlags {
    pub damping: bool,
    pub joint_friction: bool,
    pub mass: bool,
    pub surface_friction: bool,
    pub gain: bool,
    pub height_field: bool,
    pub sticky_actions: bool,
    pub wrenches: bool,
    pub high_level_noise: bool,
    pub object_dims: bool,
}

impl RandomizationFlags {
    pub const fn all() -> Self {
        Self {
            damping: true,
            joint_friction: true,
            mass: true,
            surface_friction: true,
            gain: true,
            height_field: true,
            sticky_actions: true,
            wrenches: true,
            high_level_noise: true,
            object_dims: true,
        }
    }

    pub const fn none() -> Self {
        Self {
            damping: false,
            joint_friction: false,
            mass: false,
            surface_friction: false,
            gain: false,
            height_field: false,
            sticky_actions: false,
            wrenches: false,
            high_level_noise: false,
            object_dims: false,
        }
    }

    /// Every low-level dynamics randomization (no high-level ones).
    pub const fn low_level() -> Self {
        Self {
            high_level_noise: false,
            object_dims: false,
            ..Self::all()
        }
    }

    pub fn any_dynamics(&self) -> bool {
        self.damping
            || self.joint_friction
            || self.mass
            || self.surface_friction
            || self.gain
            || self.height_field
            || self.sticky_actions
            || self.wrenches
    }
}

impl Default for RandomizationFlags {
    fn default() -> Self {
        Self::low_level()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomizationConfig {
    pub damping_range: Range,
    pub joint_friction_range: Range,
    pub mass_range: Range,
    pub surface_friction_range: Range,
    pub gain_range: Range,
    pub hfield_amplitude_range: Range,
    pub sticky_prob: f64,
    /// Steps between fresh wrench draws.
    pub wrench_period: u64,
    pub wrench_force_range: Range,
    pub wrench_torque_range: Range,
    pub highlevel_noise_range: Range,
    pub object_dim_scale_range: Range,
    pub enabled: RandomizationFlags,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self {
            damping_range: Range::new(0.9, 1.1),
            joint_friction_range: Range::new(0.001, 0.005),
            mass_range: Range::new(1.6, 2.0),
            surface_friction_range: Range::new(0.8, 1.2),
            gain_range: Range::new(4.0, 6.0),
            hfield_amplitude_range: Range::new(0.0, 0.050),
            sticky_prob: 0.2,
            wrench_period: 10,
            wrench_force_range: Range::new(-10.0, 10.0),
            wrench_torque_range: Range::new(-1.0, 1.0),
            highlevel_noise_range: Range::new(-1.0, 1.0),
            object_dim_scale_range: Range::new(0.8, 1.2),
            enabled: RandomizationFlags::default(),
        }
    }
}

impl RandomizationConfig {
    pub fn with_flags(enabled: RandomizationFlags) -> Self {
        Self {
            enabled,
            ..Self::default()
        }
    }

    /// Nominal dynamics: nothing randomized.
    pub fn disabled() -> Self {
        Self::with_flags(RandomizationFlags::none())
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("damping_range", self.damping_range),
            ("joint_friction_range", self.joint_friction_range),
            ("mass_range", self.mass_range),
            ("surface_friction_range", self.surface_friction_range),
            ("gain_range", self.gain_range),
            ("hfield_amplitude_range", self.hfield_amplitude_range),
            ("wrench_force_range", self.wrench_force_range),
            ("wrench_torque_range", self.wrench_torque_range),
            ("highlevel_noise_range", self.highlevel_noise_range),
            ("object_dim_scale_range", self.object_dim_scale_range),
        ];
        for (name, r) in ranges {
            if !r.is_valid() {
                return Err(Error::config(format!("randomization.{name}: need low <= high, got [{}, {}]", r.low, r.high)));
            }
        }
        let nonneg = [
            ("damping_range", self.damping_range),
            ("joint_friction_range", self.joint_friction_range),
            ("mass_range", self.mass_range),
            ("surface_friction_range", self.surface_friction_range),
            ("gain_range", self.gain_range),
            ("hfield_amplitude_range", self.hfield_amplitude_range),
        ];
        for (name, r) in nonneg {
            if r.low < 0.0 {
                return Err(Error::config(format!("randomization.{name}: must be nonnegative")));
            }
        }
        if self.mass_range.low <= 0.0 {
            return Err(Error::config("randomization.mass_range: must be positive"));
        }
        if self.object_dim_scale_range.low <= 0.0 {
            return Err(Error::config("randomization.object_dim_scale_range: must be positive"));
        }
        if !(0.0..=1.0).contains(&self.sticky_prob) {
            return Err(Error::config(format!("randomization.sticky_prob must lie in [0, 1], got {}", self.sticky_prob)));
        }
        if self.wrench_period == 0 {
            return Err(Error::config("randomization.wrench_period must be >= 1"));
        }
        Ok(())
    }

    /// Sticky probability in effect (0 when disabled).
    pub fn effective_sticky_prob(&self) -> f64 {
        if self.enabled.sticky_actions {
            self.sticky_prob
        } else {
            0.0
        }
    }
}

fn pick<R: Rng + ?Sized>(enabled: bool, range: Range, rng: &mut R) -> f64 {
    // Always draw so that toggling one item never shifts the others.
    let v = range.sample(rng);
    if enabled {
        v
    } else {
        range.midpoint()
    }
}

/// Samples one episode's dynamics and terrain.
pub fn sample_episode_params<R: Rng + ?Sized>(config: &RandomizationConfig, rng: &mut R) -> Result<(DynamicsParams, HeightField)> {
    config.validate()?;
    let f = &config.enabled;
    let damping = pick(f.damping, config.damping_range, rng);
    let friction = pick(f.joint_friction, config.joint_friction_range, rng);
    let mass = pick(f.mass, config.mass_range, rng);
    let surface = pick(f.surface_friction, config.surface_friction_range, rng);
    let gain = pick(f.gain, config.gain_range, rng);
    let amplitude = config.hfield_amplitude_range.sample(rng);
    let terrain = if f.height_field {
        HeightField::random(amplitude, rng)
    } else {
        HeightField::flat()
    };
    Ok((DynamicsParams::new(damping, friction, gain, mass, surface), terrain))
}

/// Repeats `prev_action` with probability `sticky_prob`; never on the first step.
pub fn apply_sticky<R: Rng + ?Sized>(action: &[f64], prev_action: Option<&[f64]>, rng: &mut R, sticky_prob: f64) -> Vec<f64> {
    let draw: f64 = rng.random();
    match prev_action {
        Some(prev) if prev.len() == action.len() && draw < sticky_prob => prev.to_vec(),
        _ => action.to_vec(),
    }
}

/// Holds a torso wrench, redrawing it every `wrench_period` steps.
#[derive(Debug, Clone, Default)]
pub struct WrenchSchedule {
    current: ExternalWrench,
}

impl WrenchSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current(&self) -> ExternalWrench {
        self.current
    }

    pub fn sample_wrench<R: Rng + ?Sized>(&mut self, step: u64, rng: &mut R, config: &RandomizationConfig) -> ExternalWrench {
        if !config.enabled.wrenches {
            self.current = ExternalWrench::default();
            return self.current;
        }
        if step % config.wrench_period.max(1) == 0 {
            self.current = ExternalWrench {
                fx: config.wrench_force_range.sample(rng),
                fy: config.wrench_force_range.sample(rng),
                torque: config.wrench_torque_range.sample(rng),
            };
        }
        self.current
    }
}

/// Adds uniform noise to a high-level action and clamps to `[-1, 1]`.
pub fn perturb_high_level_action<R: Rng + ?Sized>(a_hi: &[f64], rng: &mut R, config: &RandomizationConfig) -> Vec<f64> {
    if !config.enabled.high_level_noise {
        return a_hi.to_vec();
    }
    a_hi.iter()
        .map(|a| (a + config.highlevel_noise_range.sample(rng)).clamp(-1.0, 1.0))
        .collect()
}

pub fn sample_object_dims<R: Rng + ?Sized>(nominal: (f64, f64), rng: &mut R, config: &RandomizationConfig) -> (f64, f64) {
    if !config.enabled.object_dims {
        return nominal;
    }
    let sx = config.object_dim_scale_range.sample(rng);
    let sy = config.object_dim_scale_range.sample(rng);
    (nominal.0 * sx, nominal.1 * sy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn ks_uniform(samples: &mut [f64], low: f64, high: f64) -> f64 {
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
    fn disabled_items_take_midpoints() {
        let (p, hf) = sample_episode_params(&RandomizationConfig::disabled(), &mut stream(1)).unwrap();
        assert_eq!(p.joint_damping, 1.0);
        assert!((p.total_mass - 1.8).abs() < 1e-15);
        assert_eq!(p.actuator_gain, 5.0);
        assert_eq!(hf.amplitude(), 0.0);
        assert!(hf.heights().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn mass_samples_stay_in_range_with_correct_mean() {
        let cfg = RandomizationConfig::with_flags(RandomizationFlags::all());
        let mut rng = stream(2);
        let masses: Vec<f64> = (0..10_000).map(|_| sample_episode_params(&cfg, &mut rng).unwrap().0.total_mass).collect();
        let min = masses.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = masses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = masses.iter().sum::<f64>() / masses.len() as f64;
        assert!(min >= 1.6 && max <= 2.0);
        assert!((mean - 1.8).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn bias_is_exactly_negative_gain() {
        let cfg = RandomizationConfig::with_flags(RandomizationFlags::all());
        let mut rng = stream(3);
        for _ in 0..100 {
            let (p, _) = sample_episode_params(&cfg, &mut rng).unwrap();
            assert_eq!(p.actuator_bias + p.actuator_gain, 0.0);
        }
    }

    #[test]
    fn sticky_extremes_and_frequency() {
        let mut rng = stream(4);
        let a = [1.0, 2.0];
        let prev = [3.0, 4.0];
        for _ in 0..100 {
            assert_eq!(apply_sticky(&a, Some(&prev), &mut rng, 0.0), a);
            assert_eq!(apply_sticky(&a, Some(&prev), &mut rng, 1.0), prev);
            assert_eq!(apply_sticky(&a, None, &mut rng, 1.0), a);
        }
        let sticks = (0..10_000).filter(|_| apply_sticky(&a, Some(&prev), &mut rng, 0.2) == prev).count();
        let freq = sticks as f64 / 10_000.0;
        assert!((freq - 0.2).abs() < 0.02, "freq {freq}");
    }

    #[test]
    fn wrench_is_held_between_redraws() {
        let cfg = RandomizationConfig::default();
        let mut rng = stream(5);
        let mut sched = WrenchSchedule::new();
        let w0 = sched.sample_wrench(0, &mut rng, &cfg);
        for t in 1..10 {
            assert_eq!(sched.sample_wrench(t, &mut rng, &cfg), w0);
        }
        assert_ne!(sched.sample_wrench(10, &mut rng, &cfg), w0);
    }

    #[test]
    fn disabled_wrench_is_zero() {
        let cfg = RandomizationConfig::disabled();
        let mut sched = WrenchSchedule::new();
        let mut rng = stream(6);
        for t in 0..30 {
            assert_eq!(sched.sample_wrench(t, &mut rng, &cfg), ExternalWrench::default());
        }
    }

    #[test]
    fn wrench_components_within_ranges() {
        let cfg = RandomizationConfig::default();
        let mut rng = stream(7);
        let mut sched = WrenchSchedule::new();
        for t in 0..1000 {
            let w = sched.sample_wrench(t * 10, &mut rng, &cfg);
            assert!(cfg.wrench_force_range.contains(w.fx) && cfg.wrench_force_range.contains(w.fy));
            assert!(cfg.wrench_torque_range.contains(w.torque));
        }
    }

    #[test]
    fn high_level_noise_identity_saturation_and_distribution() {
        let mut rng = stream(8);
        let off = RandomizationConfig::disabled();
        assert_eq!(perturb_high_level_action(&[0.3, -0.7], &mut rng, &off), vec![0.3, -0.7]);

        let on = RandomizationConfig::with_flags(RandomizationFlags::all());
        let saturated = RandomizationConfig {
            highlevel_noise_range: Range::new(1.0, 1.0),
            ..on.clone()
        };
        assert_eq!(perturb_high_level_action(&[1.0, 1.0], &mut rng, &saturated), vec![1.0, 1.0]);

        let draws: Vec<Vec<f64>> = (0..10_000).map(|_| perturb_high_level_action(&[0.0, 0.0], &mut rng, &on)).collect();
        for axis in 0..2 {
            let mut xs: Vec<f64> = draws.iter().map(|d| d[axis]).collect();
            let ks = ks_uniform(&mut xs, -1.0, 1.0);
            assert!(ks < 0.02, "axis {axis} ks {ks}");
        }
    }

    #[test]
    fn object_dims_scale() {
        let mut rng = stream(9);
        assert_eq!(sample_object_dims((0.15, 0.7), &mut rng, &RandomizationConfig::disabled()), (0.15, 0.7));
        let on = RandomizationConfig::with_flags(RandomizationFlags::all());
        let mut total = 0.0;
        for _ in 0..10_000 {
            let (hx, hy) = sample_object_dims((0.15, 0.7), &mut rng, &on);
            assert!((0.12..=0.18).contains(&hx), "hx {hx}");
            assert!((0.56..=0.84).contains(&hy));
            total += hx / 0.15;
        }
        assert!((total / 10_000.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = RandomizationConfig::default();
        cfg.mass_range = Range::new(2.0, 1.0);
        assert!(sample_episode_params(&cfg, &mut stream(1)).is_err());
        let cfg = RandomizationConfig { sticky_prob: 1.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = RandomizationConfig { wrench_period: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn same_seed_same_samples() {
        let cfg = RandomizationConfig::with_flags(RandomizationFlags::all());
        let a = sample_episode_params(&cfg, &mut stream(11)).unwrap();
        let b = sample_episode_params(&cfg, &mut stream(11)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sampled_params_lie_in_ranges(seed in any::<u64>()) {
            let cfg = RandomizationConfig::with_flags(RandomizationFlags::all());
            let mut rng = stream(seed);
            for _ in 0..200 {
                let (p, hf) = sample_episode_params(&cfg, &mut rng).unwrap();
                prop_assert!(cfg.damping_range.contains(p.joint_damping));
                prop_assert!(cfg.joint_friction_range.contains(p.joint_friction));
                prop_assert!(cfg.mass_range.contains(p.total_mass));
                prop_assert!(cfg.surface_friction_range.contains(p.surface_friction));
                prop_assert!(cfg.gain_range.contains(p.actuator_gain));
                prop_assert!(cfg.hfield_amplitude_range.contains(hf.amplitude()));
                prop_assert!(hf.heights().iter().all(|&h| (0.0..=hf.amplitude()).contains(&h)));
            }
        }
    }
}
