//! Natural policy gradient training for the low-level, high-level and flat
//! policies.
//!
//! One iteration collects a batch of on-policy trajectories, fits a linear
//! value baseline, computes GAE advantages, solves `F d = g` with conjugate
//! gradient using Fisher-vector products, and takes the normalized step
//! `θ ← θ + sqrt(2δ / dᵀg) · d`.

mod advantage;
mod npg;
mod rollout;
mod run;

use serde::{Deserialize, Serialize};

pub use advantage::{compute_advantages, discounted_returns, fit_baseline, gae, Baseline};
pub use npg::{batch_kl, conjugate_gradient, fisher_vector_product, npg_update, policy_gradient, CgResult, UpdateOutcome};
pub use rollout::{collect_batch, rollout, Trajectory, TrajectoryBatch};
pub use run::{
    train, train_flat, train_high_level, train_low_level, FlatSetup, HighLevelSetup, IterationMetrics, LowLevelSetup, MetricsWriter,
    TrainOutcome,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Trajectories per iteration.
    pub batch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    /// KL step size δ.
    pub step_size: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    pub log_std_floor: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
    /// Write a checkpoint every this many iterations (0: only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            batch_size: 20,
            gamma: 0.99,
            gae_lambda: 0.97,
            step_size: 0.05,
            cg_iters: 10,
            cg_damping: 1e-4,
            log_std_floor: -3.0,
            hidden: vec![32, 32],
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config(format!("train.gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config(format!("train.gae_lambda must lie in [0, 1], got {}", self.gae_lambda)));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::config(format!("train.step_size must be positive, got {}", self.step_size)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size must be at least 1"));
        }
        if !(self.cg_damping >= 0.0 && self.cg_damping.is_finite()) {
            return Err(Error::config("train.cg_damping must be nonnegative"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("train.hidden widths must be positive"));
        }
        Ok(())
    }
}
