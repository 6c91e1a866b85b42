//! Task success rates from the fixed evaluation layouts.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::MeanStderr;
use crate::env::{streams, DynamicsSource, SimEpisode};
use crate::error::{Error, Result};
use crate::policy::{hierarchical_episode, MlpPolicy, LOW_LEVEL_ACT_DIM, LOW_LEVEL_OBS_DIM};
use crate::rng::{derive_seed, substream};
use crate::tasks::{fixed_eval_init, observation_dim, EvalVariant, TaskKind};
use crate::world::NUM_JOINTS;

/// Goal horizon used when evaluating hierarchies.
pub const EVAL_GOAL_HORIZON: usize = 10;
/// Discount used for the (reported but unused) high-level returns.
const EVAL_GAMMA: f64 = 0.99;

/// A trained task policy: a high level over a frozen low level, or a flat
/// joint-space policy.
#[derive(Debug, Clone)]
pub enum TaskController {
    Hierarchical { high: Arc<MlpPolicy>, low: Arc<MlpPolicy> },
    Flat(Arc<MlpPolicy>),
}

impl TaskController {
    /// Checks the policy shapes against the task.
    pub fn check(&self, kind: TaskKind) -> Result<()> {
        let n = kind.n_agents();
        let obs = observation_dim(kind);
        let (what, got, want) = match self {
            TaskController::Hierarchical { high, low } => {
                if low.obs_dim() != LOW_LEVEL_OBS_DIM || low.act_dim() != LOW_LEVEL_ACT_DIM {
                    return Err(Error::config(format!(
                        "low-level policy is {}→{}, expected {LOW_LEVEL_OBS_DIM}→{LOW_LEVEL_ACT_DIM}",
                        low.obs_dim(),
                        low.act_dim()
                    )));
                }
                ("high-level", (high.obs_dim(), high.act_dim()), (obs, 2 * n))
            }
            TaskController::Flat(p) => ("flat", (p.obs_dim(), p.act_dim()), (obs, NUM_JOINTS * n)),
        };
        if got != want {
            return Err(Error::config(format!(
                "{what} policy is {}→{} but task {kind} needs {}→{}",
                got.0, got.1, want.0, want.1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptOutcome {
    pub model: usize,
    pub attempt: usize,
    pub variant: EvalVariant,
    pub success: bool,
    /// Undiscounted task reward over the episode.
    pub task_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessResult {
    pub attempts: Vec<AttemptOutcome>,
    /// Success fraction of each model.
    pub per_model: Vec<f64>,
    pub rate: MeanStderr,
}

/// One deterministic episode from the fixed layout of `attempt`.
pub fn run_attempt(
    controller: &TaskController,
    kind: TaskKind,
    source: &DynamicsSource,
    attempt: usize,
    seed: u64,
) -> Result<(bool, f64)> {
    let setup = fixed_eval_init(kind, EvalVariant::for_attempt(attempt));
    let mut sim = SimEpisode::new(setup, source.realize(kind.n_agents(), seed)?, seed)?;
    match controller {
        TaskController::Hierarchical { high, low } => {
            // Mean actions and no high-level noise: the rng is never drawn from.
            let mut rng = substream(seed, streams::POLICY);
            let ep = hierarchical_episode(&mut sim, high, low, EVAL_GOAL_HORIZON, EVAL_GAMMA, &mut rng, false, None)?;
            Ok((ep.success, ep.low_rewards.iter().sum()))
        }
        TaskController::Flat(policy) => {
            let mut total = 0.0;
            for _ in 0..sim.task.spec.horizon {
                let mean = policy.mean(&sim.observation())?;
                let actions: Vec<[f64; NUM_JOINTS]> = mean
                    .chunks(NUM_JOINTS)
                    .map(|c| {
                        let mut a = [0.0; NUM_JOINTS];
                        for (dst, m) in a.iter_mut().zip(c) {
                            *dst = m.clamp(-1.0, 1.0);
                        }
                        a
                    })
                    .collect();
                sim.step(&actions)?;
                total += sim.reward().total();
            }
            Ok((sim.success(), total))
        }
    }
}

/// Evaluates each model on `attempts_per_model` attempts. Attempt `j` uses the
/// layout variant `EvalVariant::for_attempt(j)` and seed `derive_seed(seed, j)`
/// for every model. Success is averaged per model; the reported error is the
/// standard error across models.
pub fn eval_success_rate(
    controllers: &[TaskController],
    kind: TaskKind,
    source: &DynamicsSource,
    attempts_per_model: usize,
    seed: u64,
) -> Result<SuccessResult> {
    if kind == TaskKind::LowLevelGoal {
        return Err(Error::config("success-rate evaluation needs a manipulation task"));
    }
    for c in controllers {
        c.check(kind)?;
    }
    let jobs: Vec<(usize, usize)> = (0..controllers.len())
        .flat_map(|m| (0..attempts_per_model).map(move |j| (m, j)))
        .collect();
    let attempts = jobs
        .par_iter()
        .map(|&(m, j)| {
            let (success, task_return) = run_attempt(&controllers[m], kind, source, j, derive_seed(seed, j as u64))?;
            Ok(AttemptOutcome {
                model: m,
                attempt: j,
                variant: EvalVariant::for_attempt(j),
                success,
                task_return,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let per_model: Vec<f64> = (0..controllers.len())
        .map(|m| {
            let wins = attempts.iter().filter(|a| a.model == m && a.success).count();
            wins as f64 / attempts_per_model.max(1) as f64
        })
        .collect();
    Ok(SuccessResult {
        rate: MeanStderr::of(&per_model),
        per_model,
        attempts,
    })
}
