//! Public-API pipeline: train a low level, checkpoint it, drive a task with it.

use std::fs;

use hsr_core::env::{streams, DynamicsSource, LowLevelEnv, SimEpisode};
use hsr_core::policy::{
    hierarchical_episode, load_checkpoint, save_checkpoint, CheckpointManifest, MlpPolicy, PolicyRole,
    LOW_LEVEL_OBS_DIM,
};
use hsr_core::randomization::{RandomizationConfig, RandomizationFlags};
use hsr_core::rng::{stream, substream};
use hsr_core::tasks::{init_task, observation_dim, TaskKind};
use hsr_core::trainer::{train, TrainConfig};
use hsr_core::Error;

fn short_config(seed: u64) -> TrainConfig {
    TrainConfig {
        iterations: 3,
        batch_size: 4,
        seed,
        ..TrainConfig::default()
    }
}

fn train_low(seed: u64) -> MlpPolicy {
    let env = LowLevelEnv::new(DynamicsSource::Randomized(RandomizationConfig::with_flags(
        RandomizationFlags::low_level(),
    )));
    let cfg = short_config(seed);
    let policy = MlpPolicy::new(LOW_LEVEL_OBS_DIM, &cfg.hidden, 12, &mut stream(seed));
    train(&env, policy, &cfg, |_, _| Ok(())).unwrap().policy
}

#[test]
fn trained_low_level_round_trips_and_drives_push() {
    let dir = tempfile::tempdir().unwrap();
    let low = train_low(3);
    let stem = dir.path().join("low");
    let manifest = save_checkpoint(&stem, &low, &CheckpointManifest::new(PolicyRole::LowLevel, &low, 3, "low-level")).unwrap();
    let (m, loaded) = load_checkpoint(&manifest).unwrap();
    assert_eq!(m.role, PolicyRole::LowLevel);
    assert_eq!(loaded.params(), low.params());

    let kind = TaskKind::Push;
    let setup = init_task(kind, &mut substream(8, streams::INIT)).unwrap();
    let mut sim = SimEpisode::new(setup, DynamicsSource::Nominal.realize(1, 8).unwrap(), 8).unwrap();
    let high = MlpPolicy::new(observation_dim(kind), &[32, 32], 2, &mut stream(9));
    let ep = hierarchical_episode(&mut sim, &high, &loaded, 10, 0.99, &mut stream(10), true, None).unwrap();
    assert_eq!(ep.hi_rewards.len(), 20);
    assert_eq!(ep.low_rewards.len(), 200);
    assert_eq!(ep.trace.frames.len(), 201);
    for (k, goals) in ep.goals.iter().enumerate() {
        let [x, y, _] = ep.trace.frames[10 * k].agents[0];
        let r = (goals[0].gx - x).hypot(goals[0].gy - y);
        assert!((0.2 - 1e-9..=0.8 + 1e-9).contains(&r), "goal {k} lies {r} m away");
    }
}

#[test]
fn training_depends_only_on_the_seed() {
    assert_eq!(train_low(5).params(), train_low(5).params());
    assert_ne!(train_low(5).params(), train_low(6).params());
}

#[test]
fn tampered_weights_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let policy = MlpPolicy::new(4, &[3], 2, &mut stream(1));
    let stem = dir.path().join("p");
    let manifest = save_checkpoint(&stem, &policy, &CheckpointManifest::new(PolicyRole::Flat, &policy, 1, "push")).unwrap();
    let bin = dir.path().join("p.bin");
    let mut bytes = fs::read(&bin).unwrap();
    bytes[0] ^= 1;
    fs::write(&bin, bytes).unwrap();
    assert!(matches!(load_checkpoint(&manifest), Err(Error::Format { .. })));
}
