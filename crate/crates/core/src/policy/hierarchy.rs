//! The two-level executor: a goal every `c` steps, low-level control between.

use rand::Rng;

use super::goal::Goal;
use super::mlp::{sample_action, MlpPolicy};
use crate::env::{run_decision, SimEpisode};
use crate::error::{Error, Result};
use crate::randomization::{perturb_high_level_action, RandomizationConfig};
use crate::tasks::EpisodeTrace;

/// Low-level steps per high-level decision.
pub const LOW_STEPS_PER_GOAL: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalEpisode {
    pub hi_observations: Vec<Vec<f64>>,
    /// High-level actions as executed (after clamping and optional noise).
    pub hi_actions: Vec<Vec<f64>>,
    /// `Σ_{i<c} γ^i r_i` per decision.
    pub hi_rewards: Vec<f64>,
    /// World-frame goals per decision, one per agent.
    pub goals: Vec<Vec<Goal>>,
    /// Task reward after every low-level step.
    pub low_rewards: Vec<f64>,
    pub trace: EpisodeTrace,
    pub success: bool,
}

/// Runs `sim` to its task horizon under the hierarchy. With `explore` the
/// high level samples from its Gaussian, otherwise it acts with its mean;
/// `hi_noise` perturbs each high-level action per its flags.
pub fn hierarchical_episode<R: Rng + ?Sized>(
    sim: &mut SimEpisode,
    pi_hi: &MlpPolicy,
    pi_lo: &MlpPolicy,
    c: usize,
    gamma: f64,
    rng: &mut R,
    explore: bool,
    hi_noise: Option<&RandomizationConfig>,
) -> Result<HierarchicalEpisode> {
    let horizon = sim.task.spec.horizon;
    if c == 0 || horizon % c != 0 {
        return Err(Error::config(format!("horizon {horizon} is not a multiple of c = {c}")));
    }
    if pi_hi.act_dim() != 2 * sim.n_agents() {
        return Err(Error::config(format!(
            "high-level policy emits {} values, the task needs {}",
            pi_hi.act_dim(),
            2 * sim.n_agents()
        )));
    }
    let decisions = horizon / c;
    let mut out = HierarchicalEpisode {
        hi_observations: Vec::with_capacity(decisions),
        hi_actions: Vec::with_capacity(decisions),
        hi_rewards: Vec::with_capacity(decisions),
        goals: Vec::with_capacity(decisions),
        low_rewards: Vec::with_capacity(horizon),
        trace: EpisodeTrace::default(),
        success: false,
    };
    for _ in 0..decisions {
        let obs = sim.observation();
        let mean = pi_hi.mean(&obs)?;
        let mut a: Vec<f64> = if explore {
            sample_action(&mean, pi_hi.log_std(), rng).1
        } else {
            mean.iter().map(|m| m.clamp(-1.0, 1.0)).collect()
        };
        if let Some(config) = hi_noise {
            a = perturb_high_level_action(&a, rng, config);
        }
        let d = run_decision(sim, &a, pi_lo, c, gamma)?;
        out.hi_observations.push(obs);
        out.hi_actions.push(a);
        out.hi_rewards.push(d.r_hi);
        out.goals.push(d.goals);
        out.low_rewards.extend(d.rewards);
    }
    out.trace = sim.trace.clone();
    out.success = sim.success();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{streams, DynamicsSource};
    use crate::policy::LOW_LEVEL_OBS_DIM;
    use crate::rng::{stream, substream};
    use crate::tasks::{init_task, task_reward, TaskKind};
    use crate::world::{world_step, NUM_JOINTS};

    fn setup(kind: TaskKind, seed: u64) -> (SimEpisode, MlpPolicy, MlpPolicy) {
        let mut rng = stream(seed);
        let s = init_task(kind, &mut substream(seed, streams::INIT)).unwrap();
        let sim = SimEpisode::new(s, DynamicsSource::Nominal.realize(kind.n_agents(), seed).unwrap(), seed).unwrap();
        let hi = MlpPolicy::new(crate::tasks::observation_dim(kind), &[32, 32], 2 * kind.n_agents(), &mut rng);
        let mut lo = MlpPolicy::new(LOW_LEVEL_OBS_DIM, &[32, 32], NUM_JOINTS, &mut rng);
        // Make the low level move so rewards vary over the episode.
        for p in lo.params_mut().iter_mut() {
            *p *= 50.0;
        }
        (sim, hi, lo)
    }

    #[test]
    fn twenty_decisions_of_ten_steps() {
        let (mut sim, hi, lo) = setup(TaskKind::Push, 1);
        let ep = hierarchical_episode(&mut sim, &hi, &lo, 10, 0.99, &mut stream(0), true, None).unwrap();
        assert_eq!(ep.hi_rewards.len(), 20);
        assert_eq!(ep.low_rewards.len(), 200);
        assert_eq!(ep.trace.frames.len(), 201);
        assert!(hierarchical_episode(&mut setup(TaskKind::Push, 1).0, &hi, &lo, 7, 0.99, &mut stream(0), false, None).is_err());
    }

    #[test]
    fn high_level_reward_is_discounted_sum() {
        for kind in TaskKind::MANIPULATION {
            let (mut sim, hi, lo) = setup(kind, 2);
            let gamma = 0.99;
            let ep = hierarchical_episode(&mut sim, &hi, &lo, 10, gamma, &mut stream(3), true, None).unwrap();
            for (k, r_hi) in ep.hi_rewards.iter().enumerate() {
                let oracle: f64 = ep.low_rewards[10 * k..10 * k + 10]
                    .iter()
                    .enumerate()
                    .map(|(i, r)| gamma.powi(i as i32) * r)
                    .sum();
                assert!((oracle - r_hi).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn oracle_replays_the_episode_independently() {
        // Re-step the world directly from the recorded goals and compare rewards.
        let (mut sim, hi, lo) = setup(TaskKind::Coordinate, 4);
        let start = sim.clone();
        let ep = hierarchical_episode(&mut sim, &hi, &lo, 10, 0.5, &mut stream(5), false, None).unwrap();
        let mut world = start.world.clone();
        let task = start.task.clone();
        let mut k = 0;
        for goals in &ep.goals {
            let mut r_hi = 0.0;
            for i in 0..10 {
                let actions: Vec<_> = world
                    .agents
                    .iter()
                    .zip(goals)
                    .map(|(a, g)| {
                        let m = lo.mean(&crate::policy::mask_low_level_obs(a, g)).unwrap();
                        let mut v = [0.0; NUM_JOINTS];
                        for j in 0..NUM_JOINTS {
                            v[j] = if a.fallen { 0.0 } else { m[j].clamp(-1.0, 1.0) };
                        }
                        v
                    })
                    .collect();
                world = world_step(&world, &actions, &vec![Default::default(); world.agents.len()]).unwrap();
                let r = task_reward(&world, &task).total();
                assert!((r - ep.low_rewards[k]).abs() <= 1e-9);
                r_hi += 0.5f64.powi(i) * r;
                k += 1;
            }
            assert!((r_hi - ep.hi_rewards[k / 10 - 1]).abs() <= 1e-9);
        }
    }

    #[test]
    fn constant_reward_geometric_sum() {
        let gamma: f64 = 0.99;
        let r_hi: f64 = (0..10).map(|i| gamma.powi(i) * -1.0).sum();
        assert!((r_hi - -(1.0 - gamma.powi(10)) / (1.0 - gamma)).abs() < 1e-12);
        assert!((r_hi - -9.56179).abs() < 1e-5);
    }

    #[test]
    fn zero_discount_keeps_first_reward() {
        let (mut sim, hi, lo) = setup(TaskKind::Avoid, 6);
        let ep = hierarchical_episode(&mut sim, &hi, &lo, 10, 0.0, &mut stream(1), true, None).unwrap();
        for (k, r_hi) in ep.hi_rewards.iter().enumerate() {
            assert_eq!(*r_hi, ep.low_rewards[10 * k]);
        }
    }

    #[test]
    fn coordinate_low_level_inputs_factorize() {
        // Agent 0's low-level observation ignores agent 1 entirely.
        let (sim, _, _) = setup(TaskKind::Coordinate, 7);
        let g = Goal::new(1.0, 1.0);
        let o1 = crate::policy::mask_low_level_obs(&sim.world.agents[0], &g);
        let mut w = sim.world.clone();
        w.agents[1].x += 3.0;
        w.agents[1].q[2] = 0.9;
        let o2 = crate::policy::mask_low_level_obs(&w.agents[0], &g);
        assert_eq!(o1, o2);
    }
}
