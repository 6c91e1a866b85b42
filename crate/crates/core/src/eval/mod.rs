//! Evaluation protocols: success rates, locomotion robustness and the
//! ablation grids, in the nominal simulator and the held-out proxy.

mod ablation;
mod locomotion;
mod proxy;
mod report;
mod stats;
mod success;

pub use ablation::{
    ablation_suite, low_level_run_dir, seed_dir_name, task_run_dir, AblationOptions, LowLevelVariant, PolicyConfig,
    ABLATION_TASKS, ATTEMPTS_PER_MODEL, LOCOMOTION_TRIALS_PER_MODEL, MODELS_PER_CONFIG,
};
pub use locomotion::{
    eval_locomotion, locomotion_trial, LocomotionResult, LocomotionTrial, LOCOMOTION_GOAL_AHEAD, LOCOMOTION_REANCHOR,
    LOCOMOTION_STEPS,
};
pub use proxy::{build_real_proxy, RealProxy};
pub use report::{Cell, CellUnit, EvalReport, Grid, LocomotionEntry, SuccessEntry};
pub use stats::MeanStderr;
pub use success::{eval_success_rate, run_attempt, AttemptOutcome, SuccessResult, TaskController, EVAL_GOAL_HORIZON};
