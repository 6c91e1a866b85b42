//! Subcommands. Each resolves the configuration, does its work and writes
//! its artifacts under `output_dir/run_name`; the returned text goes to
//! standard output.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Subcommand};
use log::info;

use hsr_core::env::DynamicsSource;
use hsr_core::eval::{
    ablation_suite, build_real_proxy, eval_locomotion, eval_success_rate, seed_dir_name, AblationOptions, Cell,
    CellUnit, EvalReport, Grid, LocomotionEntry, PolicyConfig, SuccessEntry, TaskController,
};
use hsr_core::policy::{load_checkpoint, load_low_level_of, CheckpointManifest, MlpPolicy, PolicyRole};
use hsr_core::randomization::{RandomizationConfig, RandomizationFlags};
use hsr_core::tasks::TaskKind;
use hsr_core::trainer::{
    train_flat, train_high_level, train_low_level, FlatSetup, HighLevelSetup, LowLevelSetup, TrainOutcome,
};

use crate::config::{EvalEnv, ExperimentConfig, Phase, Preset};
use crate::replay::export_replay;
use crate::{CliError, RunManifest, CODE_VERSION};

/// Flags accepted by every subcommand; they override the config file and
/// the environment.
#[derive(Debug, Clone, Default, Args)]
pub struct Globals {
    /// Experiment config file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Run seed (overrides `seed`).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Training budget preset (overrides `preset`).
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Worker threads for rollouts and evaluation (default: number of cores).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Train the goal-conditioned low-level policy.
    TrainLow,
    /// Train a high-level policy over a frozen low-level checkpoint.
    TrainHigh {
        /// Low-level checkpoint manifest (overrides `policy.low_checkpoint`).
        #[arg(long, value_name = "PATH")]
        low_checkpoint: Option<PathBuf>,
    },
    /// Train a flat joint-space baseline on the task.
    TrainFlat,
    /// Success rate of task checkpoints on the fixed evaluation layouts.
    Eval {
        /// Checkpoint manifests (default: `eval.checkpoints`).
        checkpoints: Vec<PathBuf>,
    },
    /// Evaluate every run under the ablation root and print the tables.
    Ablate,
    /// Distance travelled and fall rate of low-level checkpoints.
    LocomotionTest {
        /// Low-level checkpoint manifests (default: `eval.checkpoints`).
        checkpoints: Vec<PathBuf>,
    },
    /// Write a step-by-step JSON-lines trace of one task episode.
    ReplayExport {
        /// High-level or flat checkpoint manifest.
        checkpoint: PathBuf,
        /// Task to run (default: the checkpoint's task).
        #[arg(long)]
        task: Option<String>,
        /// Trace file (default: `<output_dir>/replay/<task>-seed<N>.jsonl`).
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TrainLow => "train-low",
            Command::TrainHigh { .. } => "train-high",
            Command::TrainFlat => "train-flat",
            Command::Eval { .. } => "eval",
            Command::Ablate => "ablate",
            Command::LocomotionTest { .. } => "locomotion-test",
            Command::ReplayExport { .. } => "replay-export",
        }
    }
}

/// Config file, then `HSR_*` variables, then command-line flags.
pub fn resolve_config(
    globals: &Globals,
    command: &Command,
    env: impl IntoIterator<Item = (String, String)>,
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(globals.config.as_deref(), env)?;
    if let Some(seed) = globals.seed {
        cfg.seed = seed;
    }
    if let Some(preset) = globals.preset {
        cfg.preset = preset;
    }
    if let Some(out) = &globals.out {
        cfg.output_dir = out.clone();
    }
    if let Command::TrainHigh {
        low_checkpoint: Some(p),
    } = command
    {
        cfg.policy.low_checkpoint = Some(p.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `command`; returns the text for standard output.
pub fn run(globals: &Globals, command: &Command, env: impl IntoIterator<Item = (String, String)>) -> Result<String, CliError> {
    let cfg = resolve_config(globals, command, env)?;
    info!("{} with config {} (code {CODE_VERSION})", command.name(), cfg.hash());
    match command {
        Command::TrainLow => train(&cfg, Phase::Low),
        Command::TrainHigh { .. } => train(&cfg, Phase::High),
        Command::TrainFlat => train(&cfg, Phase::Flat),
        Command::Eval { checkpoints } => eval(&cfg, &checkpoint_list(&cfg, checkpoints)?),
        Command::Ablate => ablate(&cfg),
        Command::LocomotionTest { checkpoints } => locomotion(&cfg, &checkpoint_list(&cfg, checkpoints)?),
        Command::ReplayExport {
            checkpoint,
            task,
            output,
        } => replay(&cfg, checkpoint, task.as_deref(), output.as_deref()),
    }
}

/// Conventional run name of a training phase: the layout the ablation
/// command expects.
pub fn default_run_name(cfg: &ExperimentConfig, phase: Phase) -> String {
    let seed = seed_dir_name(cfg.seed as usize);
    match phase {
        Phase::Low => format!("low-{}/{seed}", cfg.low_variant_name()),
        Phase::High | Phase::Flat => {
            let config = match (phase, cfg.policy.high_level_noise, cfg.policy.flat_randomized) {
                (Phase::High, true, _) => PolicyConfig::HierSim2Real,
                (Phase::High, false, _) => PolicyConfig::HierNoHlRand,
                (_, _, true) => PolicyConfig::FlatRand,
                (_, _, false) => PolicyConfig::FlatNoRand,
            };
            format!("{}-{}/{seed}", cfg.task.name(), config.name())
        }
    }
}

fn run_dir(cfg: &ExperimentConfig, default: String) -> PathBuf {
    cfg.output_dir.join(cfg.run_name.clone().unwrap_or(default))
}

fn manipulation_task(cfg: &ExperimentConfig) -> Result<TaskKind, CliError> {
    if cfg.task == TaskKind::LowLevelGoal {
        return Err(CliError::Config("task must be avoid, push or coordinate".into()));
    }
    Ok(cfg.task)
}

fn train(cfg: &ExperimentConfig, phase: Phase) -> Result<String, CliError> {
    let tc = cfg.train_config(phase);
    // Validate every input before any work starts.
    let job = match phase {
        Phase::Low => TrainJob::Low(LowLevelSetup {
            randomization: cfg.low_level_randomization(),
            weights: cfg.low_level_rewards,
        }),
        Phase::High => TrainJob::High(high_level_setup(cfg)?),
        Phase::Flat => TrainJob::Flat(FlatSetup {
            task: manipulation_task(cfg)?,
            randomized: cfg.policy.flat_randomized,
            randomization: cfg.randomization.clone(),
        }),
    };
    let dir = run_dir(cfg, default_run_name(cfg, phase));
    prepare_run_dir(&dir, cfg)?;
    let outcome: TrainOutcome = match &job {
        TrainJob::Low(s) => train_low_level(&tc, s, Some(&dir))?,
        TrainJob::High(s) => train_high_level(&tc, s, Some(&dir))?,
        TrainJob::Flat(s) => train_flat(&tc, s, Some(&dir))?,
    };
    let command = match phase {
        Phase::Low => "train-low",
        Phase::High => "train-high",
        Phase::Flat => "train-flat",
    };
    write_run_manifest(&dir, cfg, command)?;
    let last = outcome.metrics.last();
    Ok(format!(
        "run {}\niterations {}\nfinal mean return {:.4}\nfinal success rate {:.3}\ncheckpoint {}\n",
        dir.display(),
        outcome.metrics.len(),
        last.map_or(f64::NAN, |m| m.mean_return),
        last.map_or(f64::NAN, |m| m.success_rate),
        outcome.checkpoint.as_deref().map_or_else(String::new, |p| p.display().to_string()),
    ))
}

enum TrainJob {
    Low(LowLevelSetup),
    High(HighLevelSetup),
    Flat(FlatSetup),
}

fn high_level_setup(cfg: &ExperimentConfig) -> Result<HighLevelSetup, CliError> {
    let task = manipulation_task(cfg)?;
    let path = cfg.policy.low_checkpoint.clone().ok_or_else(|| {
        CliError::Config(
            "policy.low_checkpoint is required for train-high (config key, HSR_POLICY__LOW_CHECKPOINT or --low-checkpoint)"
                .into(),
        )
    })?;
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "policy.low_checkpoint: no checkpoint manifest at {}",
            path.display()
        )));
    }
    let (manifest, low) = load_checkpoint(&path)?;
    if manifest.role != PolicyRole::LowLevel {
        return Err(CliError::Config(format!(
            "policy.low_checkpoint: {} is not a low-level checkpoint",
            path.display()
        )));
    }
    let dynamics = if cfg.policy.high_level_dynamics {
        let mut r = cfg.randomization.clone();
        r.enabled = RandomizationFlags {
            high_level_noise: false,
            object_dims: false,
            ..cfg.low_level_randomization().enabled
        };
        if r.enabled.any_dynamics() {
            DynamicsSource::Randomized(r)
        } else {
            DynamicsSource::Nominal
        }
    } else {
        DynamicsSource::Nominal
    };
    let noise = RandomizationConfig {
        enabled: RandomizationFlags {
            high_level_noise: cfg.policy.high_level_noise,
            object_dims: cfg.policy.high_level_noise,
            ..RandomizationFlags::none()
        },
        ..cfg.randomization.clone()
    };
    Ok(HighLevelSetup {
        task,
        low: Arc::new(low),
        dynamics,
        noise,
        low_checkpoint: Some(path),
    })
}

fn prepare_run_dir(dir: &Path, cfg: &ExperimentConfig) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join("config.toml");
    fs::write(&path, cfg.to_toml()).map_err(|e| CliError::io(&path, e))
}

fn list_files(dir: &Path, base: &Path, out: &mut Vec<String>) -> Result<(), CliError> {
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_dir() {
            list_files(&path, base, out)?;
        } else if let Ok(rel) = path.strip_prefix(base) {
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

fn write_run_manifest(dir: &Path, cfg: &ExperimentConfig, command: &str) -> Result<(), CliError> {
    let mut outputs = Vec::new();
    list_files(dir, dir, &mut outputs)?;
    outputs.retain(|f| f != RunManifest::FILE);
    outputs.sort();
    let manifest = RunManifest {
        command: command.into(),
        run_name: dir
            .strip_prefix(&cfg.output_dir)
            .unwrap_or(dir)
            .to_string_lossy()
            .replace('\\', "/"),
        seed: cfg.seed,
        preset: cfg.preset.name().into(),
        config_hash: cfg.hash(),
        code_version: CODE_VERSION.into(),
        outputs,
    };
    let path = dir.join(RunManifest::FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

fn checkpoint_list(cfg: &ExperimentConfig, given: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let list = if given.is_empty() {
        cfg.eval.checkpoints.clone()
    } else {
        given.to_vec()
    };
    if list.is_empty() {
        return Err(CliError::Config(
            "no checkpoints given (positional arguments or eval.checkpoints)".into(),
        ));
    }
    for p in &list {
        if !p.is_file() {
            return Err(CliError::Config(format!("eval.checkpoints: no checkpoint manifest at {}", p.display())));
        }
    }
    Ok(list)
}

fn eval_source(cfg: &ExperimentConfig) -> DynamicsSource {
    match cfg.eval.env {
        EvalEnv::Proxy => DynamicsSource::Proxy(build_real_proxy(cfg.eval.proxy_seed)),
        EvalEnv::Nominal => DynamicsSource::Nominal,
    }
}

/// Loads a task checkpoint as a controller, with its low level if hierarchical.
pub(crate) fn load_task_controller(path: &Path) -> Result<(CheckpointManifest, TaskController), CliError> {
    let (manifest, policy) = load_checkpoint(path)?;
    let controller = match manifest.role {
        PolicyRole::HighLevel => {
            let (_, low) = load_low_level_of(path, &manifest)?.ok_or_else(|| {
                CliError::Config(format!("{} does not name its low-level checkpoint", path.display()))
            })?;
            TaskController::Hierarchical {
                high: Arc::new(policy),
                low: Arc::new(low),
            }
        }
        PolicyRole::Flat => TaskController::Flat(Arc::new(policy)),
        PolicyRole::LowLevel => {
            return Err(CliError::Config(format!(
                "{} is a low-level checkpoint; use locomotion-test",
                path.display()
            )))
        }
    };
    Ok((manifest, controller))
}

fn display(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

fn write_report(dir: &Path, cfg: &ExperimentConfig, command: &str, report: &EvalReport) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for stale in ["success.csv", "locomotion.csv"] {
        let _ = fs::remove_file(dir.join(stale));
    }
    prepare_run_dir(dir, cfg)?;
    report.write(dir)?;
    write_run_manifest(dir, cfg, command)
}

fn eval(cfg: &ExperimentConfig, paths: &[PathBuf]) -> Result<String, CliError> {
    let mut controllers = Vec::new();
    let mut task = None;
    let mut role = None;
    for p in paths {
        let (manifest, controller) = load_task_controller(p)?;
        let kind: TaskKind = manifest.task.parse()?;
        if task.is_some_and(|t| t != kind) || role.is_some_and(|r| r != manifest.role) {
            return Err(CliError::Config(
                "eval checkpoints must share one task and one policy kind".into(),
            ));
        }
        task = Some(kind);
        role = Some(manifest.role);
        controllers.push(controller);
    }
    let task = task.expect("at least one checkpoint");
    let config = if role == Some(PolicyRole::HighLevel) { "hierarchical" } else { "flat" };
    let env = cfg.eval.env.name();
    let result = eval_success_rate(&controllers, task, &eval_source(cfg), cfg.eval.attempts_per_model, cfg.seed)?;
    let mut grid = Grid::empty("Success rate", env, &[task.name()], &[config]);
    grid.cells[0][0] = Some(Cell {
        value: result.rate,
        unit: CellUnit::Percent,
    });
    let report = EvalReport {
        seed: cfg.seed,
        proxy_seed: cfg.eval.proxy_seed,
        success: vec![SuccessEntry {
            environment: env.into(),
            task: task.name().into(),
            config: config.into(),
            checkpoints: display(paths),
            result,
        }],
        grids: vec![grid],
        ..EvalReport::default()
    };
    let dir = run_dir(cfg, format!("eval/{}-{env}-{}", task.name(), seed_dir_name(cfg.seed as usize)));
    write_report(&dir, cfg, "eval", &report)?;
    Ok(format!("{}\nreport {}\n", report.render_tables(), dir.display()))
}

fn locomotion(cfg: &ExperimentConfig, paths: &[PathBuf]) -> Result<String, CliError> {
    let mut policies: Vec<MlpPolicy> = Vec::new();
    for p in paths {
        let (manifest, policy) = load_checkpoint(p)?;
        if manifest.role != PolicyRole::LowLevel {
            return Err(CliError::Config(format!("{} is not a low-level checkpoint", p.display())));
        }
        policies.push(policy);
    }
    let refs: Vec<&MlpPolicy> = policies.iter().collect();
    let env = cfg.eval.env.name();
    let result = eval_locomotion(&refs, &eval_source(cfg), cfg.eval.locomotion_trials, cfg.seed)?;
    let mut grid = Grid::empty(
        "Low-level locomotion",
        env,
        &["Distance Travelled", "Percentage of Falls"],
        &[cfg.low_variant_name()],
    );
    grid.cells[0][0] = Some(Cell {
        value: result.distance,
        unit: CellUnit::Metres,
    });
    grid.cells[1][0] = Some(Cell {
        value: result.fall_rate,
        unit: CellUnit::Percent,
    });
    let summary = format!(
        "distance_m {:.4}\nfall_percent {:.2}\n",
        result.distance.mean,
        100.0 * result.fall_rate.mean
    );
    let report = EvalReport {
        seed: cfg.seed,
        proxy_seed: cfg.eval.proxy_seed,
        locomotion: vec![LocomotionEntry {
            environment: env.into(),
            variant: cfg.low_variant_name().into(),
            checkpoints: display(paths),
            result,
        }],
        grids: vec![grid],
        ..EvalReport::default()
    };
    let dir = run_dir(cfg, format!("locomotion/{env}-{}", seed_dir_name(cfg.seed as usize)));
    write_report(&dir, cfg, "locomotion-test", &report)?;
    Ok(format!("{summary}{}\nreport {}\n", report.render_tables(), dir.display()))
}

fn ablate(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let root = cfg.eval.root.clone().unwrap_or_else(|| cfg.output_dir.clone());
    if !root.is_dir() {
        return Err(CliError::Config(format!("eval.root: {} is not a directory", root.display())));
    }
    let report = ablation_suite(&AblationOptions {
        root,
        seed: cfg.seed,
        proxy_seed: cfg.eval.proxy_seed,
    })?;
    let dir = run_dir(cfg, "ablation".into());
    write_report(&dir, cfg, "ablate", &report)?;
    Ok(format!("{}\nreport {}\n", report.render_tables(), dir.display()))
}

fn replay(cfg: &ExperimentConfig, checkpoint: &Path, task: Option<&str>, output: Option<&Path>) -> Result<String, CliError> {
    if !checkpoint.is_file() {
        return Err(CliError::Io(format!("no checkpoint manifest at {}", checkpoint.display())));
    }
    let (manifest, controller) = load_task_controller(checkpoint)?;
    let kind: TaskKind = match task {
        Some(t) => t.parse()?,
        None => manifest.task.parse()?,
    };
    let gamma = cfg.train_config(Phase::High).gamma;
    let path = output.map_or_else(
        || {
            cfg.output_dir
                .join("replay")
                .join(format!("{}-{}.jsonl", kind.name(), seed_dir_name(cfg.seed as usize)))
        },
        Path::to_path_buf,
    );
    let records = export_replay(&controller, kind, &eval_source(cfg), cfg.seed, gamma)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(format!("trace {} ({} records)\n", path.display(), records.len()))
}
