//! The ablation grids over a conventional run-directory layout.
//!
//! ```text
//! <root>/low-<variant>/seed<k>/low.json          variant: all | no-hfield | none
//! <root>/<task>-<config>/seed<k>/high.json       config: hier-sim2real | hier-no-hl-rand
//! <root>/<task>-<config>/seed<k>/flat.json       config: flat-rand | flat-no-rand
//! ```
//!
//! Hierarchical runs carry their frozen low level next to `high.json`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::locomotion::eval_locomotion;
use super::proxy::build_real_proxy;
use super::report::{Cell, CellUnit, EvalReport, Grid, LocomotionEntry, SuccessEntry};
use super::success::{eval_success_rate, TaskController};
use crate::env::DynamicsSource;
use crate::error::{Error, Result};
use crate::policy::{load_checkpoint, load_low_level_of, manifest_path, MlpPolicy};
use crate::randomization::{RandomizationConfig, RandomizationFlags};
use crate::tasks::TaskKind;

/// Independently trained models per configuration.
pub const MODELS_PER_CONFIG: usize = 3;
pub const ATTEMPTS_PER_MODEL: usize = 10;
pub const LOCOMOTION_TRIALS_PER_MODEL: usize = 10;
pub const ABLATION_TASKS: [TaskKind; 3] = [TaskKind::Avoid, TaskKind::Push, TaskKind::Coordinate];

/// The four policy configurations compared on every task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyConfig {
    /// Randomized low level, high level trained with action noise.
    HierSim2Real,
    /// Randomized low level, high level trained without noise.
    HierNoHlRand,
    /// Flat policy with low-level randomizations and torso noise.
    FlatRand,
    FlatNoRand,
}

impl PolicyConfig {
    pub const ALL: [PolicyConfig; 4] = [
        PolicyConfig::HierSim2Real,
        PolicyConfig::HierNoHlRand,
        PolicyConfig::FlatRand,
        PolicyConfig::FlatNoRand,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyConfig::HierSim2Real => "hier-sim2real",
            PolicyConfig::HierNoHlRand => "hier-no-hl-rand",
            PolicyConfig::FlatRand => "flat-rand",
            PolicyConfig::FlatNoRand => "flat-no-rand",
        }
    }

    pub fn header(&self) -> &'static str {
        match self {
            PolicyConfig::HierSim2Real => "Hierarchical Sim2Real",
            PolicyConfig::HierNoHlRand => "No high-level randomization",
            PolicyConfig::FlatRand => "No hierarchy, with randomization",
            PolicyConfig::FlatNoRand => "No hierarchy, no randomization",
        }
    }

    pub fn is_hierarchical(&self) -> bool {
        matches!(self, PolicyConfig::HierSim2Real | PolicyConfig::HierNoHlRand)
    }

    /// Checkpoint stem inside a seed directory.
    pub fn stem(&self) -> &'static str {
        if self.is_hierarchical() {
            "high"
        } else {
            "flat"
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// Low-level randomization variants of the locomotion table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowLevelVariant {
    All,
    NoHfield,
    None,
}

impl LowLevelVariant {
    pub const ALL: [LowLevelVariant; 3] = [LowLevelVariant::All, LowLevelVariant::NoHfield, LowLevelVariant::None];

    pub fn name(&self) -> &'static str {
        match self {
            LowLevelVariant::All => "all",
            LowLevelVariant::NoHfield => "no-hfield",
            LowLevelVariant::None => "none",
        }
    }

    pub fn header(&self) -> &'static str {
        match self {
            LowLevelVariant::All => "All randomizations",
            LowLevelVariant::NoHfield => "No height field",
            LowLevelVariant::None => "No randomizations",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn flags(&self) -> RandomizationFlags {
        match self {
            LowLevelVariant::All => RandomizationFlags::low_level(),
            LowLevelVariant::NoHfield => RandomizationFlags {
                height_field: false,
                ..RandomizationFlags::low_level()
            },
            LowLevelVariant::None => RandomizationFlags::none(),
        }
    }

    /// `base` ranges with this variant's flags.
    pub fn randomization(&self, base: &RandomizationConfig) -> RandomizationConfig {
        RandomizationConfig {
            enabled: self.flags(),
            ..base.clone()
        }
    }
}

pub fn seed_dir_name(k: usize) -> String {
    format!("seed{k}")
}

pub fn low_level_run_dir(root: &Path, variant: LowLevelVariant, k: usize) -> PathBuf {
    root.join(format!("low-{}", variant.name())).join(seed_dir_name(k))
}

pub fn task_run_dir(root: &Path, task: TaskKind, config: PolicyConfig, k: usize) -> PathBuf {
    root.join(format!("{}-{}", task.name(), config.name())).join(seed_dir_name(k))
}

fn load_controller(manifest_file: &Path, config: PolicyConfig) -> Result<TaskController> {
    let (manifest, policy) = load_checkpoint(manifest_file)?;
    if config.is_hierarchical() {
        let (_, low) = load_low_level_of(manifest_file, &manifest)?.ok_or_else(|| {
            Error::config(format!("{} names no low-level checkpoint", manifest_file.display()))
        })?;
        Ok(TaskController::Hierarchical {
            high: Arc::new(policy),
            low: Arc::new(low),
        })
    } else {
        Ok(TaskController::Flat(Arc::new(policy)))
    }
}

/// Paths of all `MODELS_PER_CONFIG` manifests, or the missing ones.
fn collect_runs(paths: Vec<PathBuf>) -> std::result::Result<Vec<PathBuf>, Vec<PathBuf>> {
    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.is_file()).cloned().collect();
    if missing.is_empty() {
        Ok(paths)
    } else {
        Err(missing)
    }
}

fn display_paths(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationOptions {
    pub root: PathBuf,
    pub seed: u64,
    pub proxy_seed: u64,
}

/// Evaluates every available run and assembles the success grids in the
/// proxy and nominal environments plus the locomotion grids in both. Cells
/// whose runs are incomplete stay pending and their missing manifests are
/// listed in `pending`.
pub fn ablation_suite(opts: &AblationOptions) -> Result<EvalReport> {
    let proxy = DynamicsSource::Proxy(build_real_proxy(opts.proxy_seed));
    let envs = [("proxy", proxy), ("nominal", DynamicsSource::Nominal)];
    let task_rows: Vec<&str> = ABLATION_TASKS.iter().map(|t| t.name()).collect();
    let config_cols: Vec<&str> = PolicyConfig::ALL.iter().map(|c| c.header()).collect();
    let variant_cols: Vec<&str> = LowLevelVariant::ALL.iter().map(|v| v.header()).collect();
    let mut report = EvalReport {
        seed: opts.seed,
        proxy_seed: opts.proxy_seed,
        ..EvalReport::default()
    };
    let mut pending = Vec::new();

    let mut success_grids = [
        Grid::empty("Success rate by task and configuration", "proxy", &task_rows, &config_cols),
        Grid::empty("Success rate by task and configuration", "nominal", &task_rows, &config_cols),
    ];
    for (i, task) in ABLATION_TASKS.iter().enumerate() {
        for (j, config) in PolicyConfig::ALL.iter().enumerate() {
            let paths = (0..MODELS_PER_CONFIG)
                .map(|k| manifest_path(&task_run_dir(&opts.root, *task, *config, k).join(config.stem())))
                .collect();
            let paths = match collect_runs(paths) {
                Ok(p) => p,
                Err(missing) => {
                    pending.extend(display_paths(&missing));
                    continue;
                }
            };
            let controllers = paths
                .iter()
                .map(|p| load_controller(p, *config))
                .collect::<Result<Vec<_>>>()?;
            for (g, (env_name, source)) in envs.iter().enumerate() {
                let result = eval_success_rate(&controllers, *task, source, ATTEMPTS_PER_MODEL, opts.seed)?;
                success_grids[g].cells[i][j] = Some(Cell {
                    value: result.rate,
                    unit: CellUnit::Percent,
                });
                report.success.push(SuccessEntry {
                    environment: env_name.to_string(),
                    task: task.name().into(),
                    config: config.name().into(),
                    checkpoints: display_paths(&paths),
                    result,
                });
            }
        }
    }

    let metric_rows = ["Distance Travelled", "Percentage of Falls"];
    let mut loco_grids = [
        Grid::empty("Low-level locomotion", "proxy", &metric_rows, &variant_cols),
        Grid::empty("Low-level locomotion", "nominal", &metric_rows, &variant_cols),
    ];
    for (j, variant) in LowLevelVariant::ALL.iter().enumerate() {
        let paths = (0..MODELS_PER_CONFIG)
            .map(|k| manifest_path(&low_level_run_dir(&opts.root, *variant, k).join("low")))
            .collect();
        let paths = match collect_runs(paths) {
            Ok(p) => p,
            Err(missing) => {
                pending.extend(display_paths(&missing));
                continue;
            }
        };
        let policies: Vec<MlpPolicy> = paths
            .iter()
            .map(|p| load_checkpoint(p).map(|(_, pol)| pol))
            .collect::<Result<_>>()?;
        let refs: Vec<&MlpPolicy> = policies.iter().collect();
        for (g, (env_name, source)) in envs.iter().enumerate() {
            let result = eval_locomotion(&refs, source, LOCOMOTION_TRIALS_PER_MODEL, opts.seed)?;
            loco_grids[g].cells[0][j] = Some(Cell {
                value: result.distance,
                unit: CellUnit::Metres,
            });
            loco_grids[g].cells[1][j] = Some(Cell {
                value: result.fall_rate,
                unit: CellUnit::Percent,
            });
            report.locomotion.push(LocomotionEntry {
                environment: env_name.to_string(),
                variant: variant.name().into(),
                checkpoints: display_paths(&paths),
                result,
            });
        }
    }
    let [s_proxy, s_nominal] = success_grids;
    let [l_proxy, l_nominal] = loco_grids;
    report.grids = vec![s_proxy, s_nominal, l_proxy, l_nominal];
    report.pending = pending;
    Ok(report)
}
