use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use super::advantage::{compute_advantages, fit_baseline};
use super::npg::{batch_kl, conjugate_gradient, npg_update, policy_gradient, FisherOperator, UpdateOutcome};
use super::rollout::collect_batch;
use super::TrainConfig;
use crate::env::{DynamicsSource, Environment, FlatEnv, HighLevelEnv, LowLevelEnv};
use crate::error::{ensure_finite, Error, Result};
use crate::policy::{save_checkpoint, CheckpointManifest, MlpPolicy, PolicyRole};
use crate::randomization::{RandomizationConfig, RandomizationFlags};
use crate::rng::{derive_seed, substream};
use crate::tasks::{RewardWeights, TaskKind};

/// Hidden width of the flat baselines.
pub const FLAT_HIDDEN: usize = 64;
/// Torso-position observation noise of the randomized flat baseline.
pub const FLAT_TORSO_NOISE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub mean_return: f64,
    pub std_return: f64,
    /// Batch KL of the accepted step (0 when the update was skipped or rejected).
    pub mean_kl: f64,
    pub success_rate: f64,
    pub wall_time: f64,
    pub accepted: bool,
}

/// Appends per-iteration metrics as CSV.
pub struct MetricsWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl MetricsWriter {
    pub const HEADER: &'static str = "iteration,mean_return,std_return,mean_kl,success_rate,wall_time";

    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", Self::HEADER).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            out,
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, m: &IterationMetrics) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{:.3}",
            m.iteration, m.mean_return, m.std_return, m.mean_kl, m.success_rate, m.wall_time
        )
        .and_then(|_| self.out.flush())
        .map_err(|e| Error::io(&self.path, e))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: MlpPolicy,
    pub metrics: Vec<IterationMetrics>,
    /// Manifest path of the final checkpoint when an output directory was given.
    pub checkpoint: Option<PathBuf>,
}

/// Generic NPG loop. `on_iteration` sees the metrics and the updated policy
/// after every iteration.
pub fn train<E, F>(env: &E, mut policy: MlpPolicy, cfg: &TrainConfig, mut on_iteration: F) -> Result<TrainOutcome>
where
    E: Environment,
    F: FnMut(&IterationMetrics, &MlpPolicy) -> Result<()>,
{
    cfg.validate()?;
    if policy.obs_dim() != env.obs_dim() || policy.act_dim() != env.act_dim() {
        return Err(Error::config(format!(
            "policy is {}→{}, environment needs {}→{}",
            policy.obs_dim(),
            policy.act_dim(),
            env.obs_dim(),
            env.act_dim()
        )));
    }
    let start = Instant::now();
    let mut metrics = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let mut batch = collect_batch(env, &policy, cfg.batch_size, derive_seed(cfg.seed, 1 + it as u64))?;
        let baseline = fit_baseline(&batch, cfg.gamma);
        compute_advantages(&mut batch, Some(&baseline), cfg.gamma, cfg.gae_lambda);
        let g = policy_gradient(&batch, &policy)?;
        let fisher = FisherOperator::new(&batch, &policy, cfg.cg_damping)?;
        let cg = conjugate_gradient(|v| fisher.apply(v), &g, cfg.cg_iters, 1e-10)?;
        let mut candidate = policy.clone();
        let (accepted, kl) = match npg_update(&mut candidate, &g, &cg.x, cfg.step_size, cfg.log_std_floor) {
            UpdateOutcome::Skipped => (false, 0.0),
            UpdateOutcome::Applied { .. } => {
                let kl = batch_kl(&policy, &candidate, &batch)?;
                if kl.is_finite() && kl <= 2.0 * cfg.step_size {
                    (true, kl)
                } else {
                    log::warn!("iteration {it}: batch KL {kl:.4} exceeds 2δ; update rejected");
                    (false, 0.0)
                }
            }
        };
        if accepted {
            ensure_finite(candidate.params(), "policy parameters")?;
            policy = candidate;
        }
        let m = IterationMetrics {
            iteration: it,
            mean_return: batch.mean_return(),
            std_return: batch.std_return(),
            mean_kl: kl,
            success_rate: batch.success_rate(),
            wall_time: start.elapsed().as_secs_f64(),
            accepted,
        };
        log::debug!(
            "iter {it}: return {:.3} ± {:.3}, success {:.2}, kl {:.4}",
            m.mean_return,
            m.std_return,
            m.success_rate,
            m.mean_kl
        );
        on_iteration(&m, &policy)?;
        metrics.push(m);
    }
    Ok(TrainOutcome {
        policy,
        metrics,
        checkpoint: None,
    })
}

fn initial_policy(obs_dim: usize, hidden: &[usize], act_dim: usize, seed: u64) -> MlpPolicy {
    MlpPolicy::new(obs_dim, hidden, act_dim, &mut substream(seed, 0))
}

/// Runs `train`, writing `metrics.csv` and periodic checkpoints to `out_dir`.
fn train_to_dir<E: Environment>(
    env: &E,
    policy: MlpPolicy,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
    stem: &str,
    manifest: CheckpointManifest,
) -> Result<TrainOutcome> {
    let mut writer = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Some(MetricsWriter::create(&dir.join("metrics.csv"))?)
        }
        None => None,
    };
    let every = cfg.checkpoint_every;
    let mut outcome = train(env, policy, cfg, |m, p| {
        if let Some(w) = writer.as_mut() {
            w.append(m)?;
        }
        if let (Some(dir), true) = (out_dir, every > 0 && (m.iteration + 1) % every == 0) {
            let mut man = manifest.clone();
            man.metadata.insert("iterations".into(), (m.iteration + 1).to_string());
            save_checkpoint(&dir.join(stem), p, &man)?;
        }
        Ok(())
    })?;
    if let Some(dir) = out_dir {
        let mut man = manifest;
        man.metadata.insert("iterations".into(), cfg.iterations.to_string());
        outcome.checkpoint = Some(save_checkpoint(&dir.join(stem), &outcome.policy, &man)?);
    }
    Ok(outcome)
}

fn low_level_source(randomization: &RandomizationConfig) -> DynamicsSource {
    if randomization.enabled.any_dynamics() {
        DynamicsSource::Randomized(randomization.clone())
    } else {
        DynamicsSource::Nominal
    }
}

/// Low-level training setup.
#[derive(Debug, Clone, Default)]
pub struct LowLevelSetup {
    pub randomization: RandomizationConfig,
    pub weights: RewardWeights,
}

/// Trains the goal-conditioned low level. Checkpoint stem: `low`.
pub fn train_low_level(cfg: &TrainConfig, setup: &LowLevelSetup, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    let randomization = &setup.randomization;
    randomization.validate()?;
    let mut env = LowLevelEnv::new(low_level_source(randomization));
    env.weights = setup.weights;
    let policy = initial_policy(env.obs_dim(), &cfg.hidden, env.act_dim(), cfg.seed);
    let mut manifest = CheckpointManifest::new(PolicyRole::LowLevel, &policy, cfg.seed, TaskKind::LowLevelGoal.name());
    manifest.metadata.insert("dynamics".into(), env.source.name().into());
    manifest.metadata.insert("randomization".into(), flags_summary(&randomization.enabled));
    train_to_dir(&env, policy, cfg, out_dir, "low", manifest)
}

/// High-level training setup.
#[derive(Debug, Clone)]
pub struct HighLevelSetup {
    pub task: TaskKind,
    pub low: Arc<MlpPolicy>,
    /// Dynamics under which the frozen low level runs.
    pub dynamics: DynamicsSource,
    /// High-level action noise and object-dimension randomization.
    pub noise: RandomizationConfig,
    /// Manifest of the low-level checkpoint, copied next to the high-level one.
    pub low_checkpoint: Option<PathBuf>,
}

/// Trains a high-level policy over a frozen low level. Checkpoint stem: `high`;
/// the low-level checkpoint is copied into the run directory as `low`.
pub fn train_high_level(cfg: &TrainConfig, setup: &HighLevelSetup, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    setup.noise.validate()?;
    let mut env = HighLevelEnv::new(setup.task, setup.dynamics.clone(), setup.low.clone(), setup.noise.clone());
    env.gamma = cfg.gamma;
    let policy = initial_policy(env.obs_dim(), &cfg.hidden, env.act_dim(), cfg.seed);
    let mut manifest = CheckpointManifest::new(PolicyRole::HighLevel, &policy, cfg.seed, setup.task.name());
    manifest.metadata.insert("dynamics".into(), env.source.name().into());
    manifest.metadata.insert("randomization".into(), flags_summary(&setup.noise.enabled));
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let low_manifest = CheckpointManifest::new(PolicyRole::LowLevel, &setup.low, 0, TaskKind::LowLevelGoal.name());
        let copied = match &setup.low_checkpoint {
            Some(src) => copy_checkpoint(src, &dir.join("low"))?,
            None => save_checkpoint(&dir.join("low"), &setup.low, &low_manifest)?,
        };
        manifest.low_level = copied.file_name().map(|n| n.to_string_lossy().into_owned());
    }
    let before = setup.low.params().to_vec();
    let outcome = train_to_dir(&env, policy, cfg, out_dir, "high", manifest)?;
    debug_assert_eq!(before, setup.low.params(), "low-level weights must stay frozen");
    Ok(outcome)
}

fn copy_checkpoint(src_manifest: &Path, dst_stem: &Path) -> Result<PathBuf> {
    let (manifest, policy) = crate::policy::load_checkpoint(src_manifest)?;
    save_checkpoint(dst_stem, &policy, &manifest)
}

/// Flat-baseline setup.
#[derive(Debug, Clone)]
pub struct FlatSetup {
    pub task: TaskKind,
    /// Applies low-level dynamics randomization plus torso-position noise.
    pub randomized: bool,
    pub randomization: RandomizationConfig,
}

/// Trains a non-hierarchical policy on the task. Checkpoint stem: `flat`.
pub fn train_flat(cfg: &TrainConfig, setup: &FlatSetup, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    let (source, noise) = if setup.randomized {
        setup.randomization.validate()?;
        let mut r = setup.randomization.clone();
        r.enabled = RandomizationFlags::low_level();
        (DynamicsSource::Randomized(r), FLAT_TORSO_NOISE)
    } else {
        (DynamicsSource::Nominal, 0.0)
    };
    let env = FlatEnv::new(setup.task, source, noise);
    let hidden: Vec<usize> = cfg.hidden.iter().map(|_| FLAT_HIDDEN).collect();
    let policy = initial_policy(env.obs_dim(), &hidden, env.act_dim(), cfg.seed);
    let mut manifest = CheckpointManifest::new(PolicyRole::Flat, &policy, cfg.seed, setup.task.name());
    manifest.metadata.insert("dynamics".into(), env.source.name().into());
    manifest.metadata.insert("torso_noise".into(), noise.to_string());
    train_to_dir(&env, policy, cfg, out_dir, "flat", manifest)
}

fn flags_summary(f: &RandomizationFlags) -> String {
    let names = [
        ("damping", f.damping),
        ("joint_friction", f.joint_friction),
        ("mass", f.mass),
        ("surface_friction", f.surface_friction),
        ("gain", f.gain),
        ("height_field", f.height_field),
        ("sticky_actions", f.sticky_actions),
        ("wrenches", f.wrenches),
        ("high_level_noise", f.high_level_noise),
        ("object_dims", f.object_dims),
    ];
    let on: Vec<&str> = names.iter().filter(|(_, b)| *b).map(|(n, _)| *n).collect();
    if on.is_empty() {
        "none".into()
    } else {
        on.join("+")
    }
}
