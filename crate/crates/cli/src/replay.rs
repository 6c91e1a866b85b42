//! JSON-lines episode traces for external plotting.
//!
//! A hierarchical episode yields one `goal` record per high-level decision,
//! written before the `step` records it governs, and one `step` record per
//! low-level step. `r_hi` of a goal record equals the discounted sum
//! `Σ_i gamma^i reward` over the following `step` records. Flat episodes
//! contain only `step` records.

use serde::{Deserialize, Serialize};

use hsr_core::env::{streams, DynamicsSource, SimEpisode};
use hsr_core::eval::{TaskController, EVAL_GOAL_HORIZON};
use hsr_core::policy::hierarchical_episode;
use hsr_core::rng::substream;
use hsr_core::tasks::{init_task, TaskKind};
use hsr_core::world::NUM_JOINTS;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TraceRecord {
    Goal {
        decision: usize,
        /// Low-level step at which the goal takes effect.
        step: usize,
        /// Executed high-level action.
        action: Vec<f64>,
        /// World-frame goal per agent.
        goals: Vec<[f64; 2]>,
        gamma: f64,
        r_hi: f64,
    },
    Step {
        /// 1-based step index; poses are after the step.
        step: usize,
        /// `(x, y, yaw)` per agent.
        agents: Vec<[f64; 3]>,
        blocks: Vec<[f64; 3]>,
        reward: f64,
    },
}

/// Runs one episode from the seeded random initial state with mean actions.
pub fn export_replay(
    controller: &TaskController,
    kind: TaskKind,
    source: &DynamicsSource,
    seed: u64,
    gamma: f64,
) -> Result<Vec<TraceRecord>, CliError> {
    if kind == TaskKind::LowLevelGoal {
        return Err(CliError::Config("replay-export needs a manipulation task".into()));
    }
    controller.check(kind)?;
    let setup = init_task(kind, &mut substream(seed, streams::INIT))?;
    let mut sim = SimEpisode::new(setup, source.realize(kind.n_agents(), seed)?, seed)?;
    let mut records = Vec::new();
    match controller {
        TaskController::Hierarchical { high, low } => {
            let mut rng = substream(seed, streams::POLICY);
            let ep = hierarchical_episode(&mut sim, high, low, EVAL_GOAL_HORIZON, gamma, &mut rng, false, None)?;
            for (k, ((action, goals), r_hi)) in ep.hi_actions.iter().zip(&ep.goals).zip(&ep.hi_rewards).enumerate() {
                let start = k * EVAL_GOAL_HORIZON;
                records.push(TraceRecord::Goal {
                    decision: k,
                    step: start,
                    action: action.clone(),
                    goals: goals.iter().map(|g| [g.gx, g.gy]).collect(),
                    gamma,
                    r_hi: *r_hi,
                });
                let end = (start + EVAL_GOAL_HORIZON).min(ep.low_rewards.len());
                for t in start..end {
                    let frame = &ep.trace.frames[t + 1];
                    records.push(TraceRecord::Step {
                        step: t + 1,
                        agents: frame.agents.clone(),
                        blocks: frame.blocks.clone(),
                        reward: ep.low_rewards[t],
                    });
                }
            }
        }
        TaskController::Flat(policy) => {
            for t in 0..sim.task.spec.horizon {
                let mean = policy.mean(&sim.observation())?;
                let actions: Vec<[f64; NUM_JOINTS]> = mean
                    .chunks(NUM_JOINTS)
                    .map(|c| std::array::from_fn(|j| c[j].clamp(-1.0, 1.0)))
                    .collect();
                sim.step(&actions)?;
                let frame = sim.trace.frames.last().expect("recorded");
                records.push(TraceRecord::Step {
                    step: t + 1,
                    agents: frame.agents.clone(),
                    blocks: frame.blocks.clone(),
                    reward: sim.reward().total(),
                });
            }
        }
    }
    Ok(records)
}
