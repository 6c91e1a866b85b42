//! Hierarchical sim-to-real laboratory.
//!
//! A goal-conditioned low-level locomotion policy is trained under domain
//! randomization in a planar multi-agent surrogate simulator, frozen, and then
//! driven by a goal-proposing high-level policy on object-pushing tasks.
//! Policies are evaluated zero-shot in a held-out environment whose dynamics
//! lie outside every training range.

pub mod env;
pub mod error;
pub mod eval;
pub mod policy;
pub mod randomization;
pub mod rng;
pub mod tasks;
pub mod trainer;
pub mod world;

pub use error::{Error, Result};
