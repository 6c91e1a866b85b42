//! Gaussian MLP policies, the goal interface between the two levels, and
//! checkpoint persistence.

pub mod checkpoint;
pub mod goal;
pub mod hierarchy;
pub mod mlp;

pub use checkpoint::{
    load_checkpoint, load_low_level_of, manifest_path, save_checkpoint, CheckpointManifest, PolicyRole,
};
pub use goal::{
    body_to_world, f_goal_space, goal_from_high_level, h_map, mask_low_level_obs, world_to_body, Goal,
    LOW_LEVEL_ACT_DIM, LOW_LEVEL_OBS_DIM, MASKED_POSE_SLOTS,
};
pub use hierarchy::{hierarchical_episode, HierarchicalEpisode, LOW_STEPS_PER_GOAL};
pub use mlp::{gaussian_kl, gaussian_log_prob, sample_action, Activations, MlpPolicy};
