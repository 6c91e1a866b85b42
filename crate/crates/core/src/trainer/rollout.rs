use rayon::prelude::*;

use crate::env::{streams, Environment};
use crate::error::{ensure_finite, Result};
use crate::policy::{sample_action, MlpPolicy};
use crate::rng::{derive_seed, substream};

/// One on-policy episode. `actions` are the raw Gaussian samples; the
/// environment received their clamp to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub success: bool,
    /// Discounted reward-to-go, filled by `compute_advantages`.
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryBatch {
    pub trajectories: Vec<Trajectory>,
    pub horizon: usize,
}

impl TrajectoryBatch {
    pub fn num_samples(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn mean_return(&self) -> f64 {
        let n = self.trajectories.len().max(1) as f64;
        self.trajectories.iter().map(Trajectory::total_reward).sum::<f64>() / n
    }

    pub fn std_return(&self) -> f64 {
        let n = self.trajectories.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean_return();
        let var = self
            .trajectories
            .iter()
            .map(|t| (t.total_reward() - m).powi(2))
            .sum::<f64>()
            / n as f64;
        var.sqrt()
    }

    pub fn success_rate(&self) -> f64 {
        let n = self.trajectories.len().max(1) as f64;
        self.trajectories.iter().filter(|t| t.success).count() as f64 / n
    }
}

/// Runs one stochastic episode with seed `seed`.
pub fn rollout<E: Environment>(env: &E, policy: &MlpPolicy, seed: u64) -> Result<Trajectory> {
    let mut rng = substream(seed, streams::POLICY);
    let (mut episode, mut obs) = env.reset(seed)?;
    let horizon = env.horizon();
    let mut traj = Trajectory {
        observations: Vec::with_capacity(horizon),
        actions: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        log_probs: Vec::with_capacity(horizon),
        ..Trajectory::default()
    };
    for _ in 0..horizon {
        let mean = policy.mean(&obs)?;
        let (raw, clamped) = sample_action(&mean, policy.log_std(), &mut rng);
        let lp = crate::policy::gaussian_log_prob(&mean, policy.log_std(), &raw);
        let tr = env.step(&mut episode, &clamped)?;
        ensure_finite(&[tr.reward, lp], "rollout reward/log-probability")?;
        traj.observations.push(std::mem::replace(&mut obs, tr.obs));
        traj.actions.push(raw);
        traj.rewards.push(tr.reward);
        traj.log_probs.push(lp);
        if tr.done {
            break;
        }
    }
    traj.success = env.success(&episode);
    Ok(traj)
}

/// Collects `n_traj` episodes; episode `i` uses seed `derive_seed(seed, i)`.
/// Episodes run in parallel on the current rayon pool and are returned in
/// index order, so the batch does not depend on the number of workers.
pub fn collect_batch<E: Environment>(env: &E, policy: &MlpPolicy, n_traj: usize, seed: u64) -> Result<TrajectoryBatch> {
    let trajectories = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| rollout(env, policy, derive_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryBatch {
        trajectories,
        horizon: env.horizon(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{DynamicsSource, LowLevelEnv, PointMassEnv};
    use crate::rng::stream;

    #[test]
    fn batches_are_deterministic() {
        let env = LowLevelEnv::new(DynamicsSource::Nominal);
        let policy = MlpPolicy::new(32, &[32, 32], 12, &mut stream(0));
        let a = collect_batch(&env, &policy, 1, 7).unwrap();
        let b = collect_batch(&env, &policy, 1, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.trajectories[0].len() <= 40);
    }

    #[test]
    fn worker_count_does_not_change_batch() {
        let env = PointMassEnv::default();
        let policy = MlpPolicy::new(2, &[8], 2, &mut stream(1));
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| collect_batch(&env, &policy, 12, 3)).unwrap();
        let b = three.install(|| collect_batch(&env, &policy, 12, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_probs_match_policy() {
        let env = PointMassEnv::default();
        let policy = MlpPolicy::new(2, &[8], 2, &mut stream(2));
        let batch = collect_batch(&env, &policy, 3, 0).unwrap();
        for t in &batch.trajectories {
            assert_eq!(t.len(), 20);
            for ((o, a), lp) in t.observations.iter().zip(&t.actions).zip(&t.log_probs) {
                assert!((policy.log_prob(o, a).unwrap() - lp).abs() < 1e-12);
            }
        }
    }

    /// Low-level env whose agent is toppled during step `k`.
    /// Low-level env whose terrain turns into a cliff field at step `k`.
    struct FallAt {
        inner: LowLevelEnv,
        k: u64,
    }

    impl Environment for FallAt {
        type Episode = crate::env::SimEpisode;
        fn obs_dim(&self) -> usize {
            self.inner.obs_dim()
        }
        fn act_dim(&self) -> usize {
            self.inner.act_dim()
        }
        fn horizon(&self) -> usize {
            self.inner.horizon()
        }
        fn reset(&self, seed: u64) -> Result<(Self::Episode, Vec<f64>)> {
            self.inner.reset(seed)
        }
        fn step(&self, ep: &mut Self::Episode, action: &[f64]) -> Result<crate::env::Transition> {
            if ep.world.step == self.k {
                // Slopes of this size push stability far below zero.
                ep.world.terrain = crate::world::HeightField::random(20.0, &mut crate::rng::stream(self.k));
            }
            self.inner.step(ep, action)
        }
        fn success(&self, ep: &Self::Episode) -> bool {
            self.inner.success(ep)
        }
    }

    #[test]
    fn fall_at_step_k_gives_length_k_plus_one() {
        let policy = MlpPolicy::zeros(32, &[8], 12);
        for k in [0u64, 5, 17, 39] {
            let env = FallAt {
                inner: LowLevelEnv::new(DynamicsSource::Nominal),
                k,
            };
            let t = rollout(&env, &policy, 11).unwrap();
            assert_eq!(t.len() as u64, k + 1, "fall at step {k}");
            assert!(!t.success);
        }
    }
}
