//! Experiment configuration: TOML file, presets and `HSR_` environment
//! overrides.
//!
//! Schema (every key optional; unknown keys are rejected):
//!
//! ```toml
//! run_name = "push-hier"          # default: conventional run path, see `default_run_name`
//! seed = 0
//! task = "push"                   # low-level | avoid | push | coordinate
//! preset = "desk"                 # desk | paper
//! output_dir = "runs"
//!
//! [policy]
//! kind = "hierarchical"           # hierarchical | flat (what `eval` expects to load)
//! hidden = [32, 32]               # default: preset width for the phase
//! low_checkpoint = "runs/low-all/seed0/low.json"   # required by train-high
//! low_variant = "all"             # all | no-hfield | none; overrides randomization.enabled for train-low
//! high_level_noise = true         # train-high: action noise and object-dimension randomization
//! high_level_dynamics = false     # train-high: also resample low-level dynamics per episode
//! flat_randomized = true          # train-flat: low-level randomizations plus torso noise
//!
//! [randomization]                 # ranges and flags, see RandomizationConfig
//! [low_level_rewards]             # RewardWeights used by train-low
//! [train]                         # any TrainConfig field except seed
//!
//! [eval]
//! env = "proxy"                   # proxy | nominal
//! proxy_seed = 0
//! attempts_per_model = 10
//! locomotion_trials = 10
//! checkpoints = []                # manifests for eval / locomotion-test
//! root = "runs"                   # ablate: run-directory root (default: output_dir)
//! ```
//!
//! Environment variables `HSR_<KEY>` override keys after the file is read;
//! `__` separates nesting levels, e.g. `HSR_TRAIN__ITERATIONS=50` or
//! `HSR_RANDOMIZATION__ENABLED__WRENCHES=false`. Values are parsed as TOML
//! literals and fall back to strings.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hsr_core::eval::LowLevelVariant;
use hsr_core::randomization::{RandomizationConfig, RandomizationFlags};
use hsr_core::tasks::{RewardWeights, TaskKind};
use hsr_core::trainer::TrainConfig;

use crate::CliError;

pub const ENV_PREFIX: &str = "HSR_";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Desk,
    Paper,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        }
    }
}

/// Training phase, for preset budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Low,
    High,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub iterations: usize,
    pub batch_size: usize,
}

impl Preset {
    pub fn budget(&self, phase: Phase) -> Budget {
        let (iterations, batch_size) = match (self, phase) {
            (Preset::Desk, Phase::Low) => (1000, 20),
            (Preset::Desk, Phase::High) => (DESK_HIGH_ITERATIONS, DESK_HIGH_BATCH),
            (Preset::Desk, Phase::Flat) => (DESK_HIGH_ITERATIONS, DESK_HIGH_BATCH),
            (Preset::Paper, Phase::Low) => (15000, 100),
            (Preset::Paper, Phase::High) | (Preset::Paper, Phase::Flat) => (5000, 200),
        };
        Budget { iterations, batch_size }
    }
}

const DESK_HIGH_ITERATIONS: usize = 500;
const DESK_HIGH_BATCH: usize = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    #[default]
    Hierarchical,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub kind: PolicyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub low_checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub low_variant: Option<LowLevelVariant>,
    pub high_level_noise: bool,
    pub high_level_dynamics: bool,
    pub flat_randomized: bool,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Hierarchical,
            hidden: None,
            low_checkpoint: None,
            low_variant: None,
            high_level_noise: true,
            high_level_dynamics: false,
            flat_randomized: true,
        }
    }
}

/// Optional overrides of the preset training configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gae_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_damping: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_std_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalEnv {
    #[default]
    Proxy,
    Nominal,
}

impl EvalEnv {
    pub fn name(&self) -> &'static str {
        match self {
            EvalEnv::Proxy => "proxy",
            EvalEnv::Nominal => "nominal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub env: EvalEnv,
    pub proxy_seed: u64,
    pub attempts_per_model: usize,
    pub locomotion_trials: usize,
    pub checkpoints: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            env: EvalEnv::Proxy,
            proxy_seed: 0,
            attempts_per_model: hsr_core::eval::ATTEMPTS_PER_MODEL,
            locomotion_trials: hsr_core::eval::LOCOMOTION_TRIALS_PER_MODEL,
            checkpoints: Vec::new(),
            root: None,
        }
    }
}

/// Upright weight used for low-level training by default; see the README.
pub const LOW_LEVEL_UPRIGHT_WEIGHT: f64 = 0.0;

fn default_low_level_rewards() -> RewardWeights {
    RewardWeights {
        upright: LOW_LEVEL_UPRIGHT_WEIGHT,
        ..RewardWeights::default()
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_task() -> TaskKind {
    TaskKind::Push
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_task")]
    pub task: TaskKind,
    #[serde(default)]
    pub preset: Preset,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub randomization: RandomizationConfig,
    #[serde(default = "default_low_level_rewards")]
    pub low_level_rewards: RewardWeights,
    #[serde(default)]
    pub train: TrainOverrides,
    #[serde(default)]
    pub eval: EvalSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

impl ExperimentConfig {
    /// Parses TOML text without environment overrides.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (or starts from the defaults) and applies the given
    /// `HSR_*` variables.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => fs::read_to_string(p).map_err(|e| CliError::Io(format!("cannot read config {}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        let mut overrides: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        overrides.sort();
        for (key, raw) in overrides {
            apply_override(&mut table, &key[ENV_PREFIX.len()..], &raw)?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.randomization
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(h) = &self.policy.hidden {
            if h.is_empty() || h.contains(&0) {
                return Err(CliError::Config("policy.hidden must list positive widths".into()));
            }
        }
        if self.eval.attempts_per_model == 0 || self.eval.locomotion_trials == 0 {
            return Err(CliError::Config("eval.attempts_per_model and eval.locomotion_trials must be positive".into()));
        }
        for phase in [Phase::Low, Phase::High, Phase::Flat] {
            self.train_config(phase)
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// `sha256:` digest of the canonical TOML serialization, with
    /// `output_dir` left out so the same experiment hashes the same wherever
    /// it is written.
    pub fn hash(&self) -> String {
        let located = Self {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let digest = Sha256::digest(located.to_toml().as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        format!("sha256:{hex}")
    }

    /// Preset budget and defaults with the `[train]` overrides applied.
    pub fn train_config(&self, phase: Phase) -> TrainConfig {
        let budget = self.preset.budget(phase);
        let o = &self.train;
        let d = TrainConfig::default();
        TrainConfig {
            iterations: o.iterations.unwrap_or(budget.iterations),
            batch_size: o.batch_size.unwrap_or(budget.batch_size),
            gamma: o.gamma.unwrap_or(d.gamma),
            gae_lambda: o.gae_lambda.unwrap_or(d.gae_lambda),
            step_size: o.step_size.unwrap_or(d.step_size),
            cg_iters: o.cg_iters.unwrap_or(d.cg_iters),
            cg_damping: o.cg_damping.unwrap_or(d.cg_damping),
            log_std_floor: o.log_std_floor.unwrap_or(d.log_std_floor),
            hidden: self.policy.hidden.clone().unwrap_or(d.hidden),
            seed: self.seed,
            checkpoint_every: o.checkpoint_every.unwrap_or(d.checkpoint_every),
        }
    }

    /// Randomization used by `train-low`.
    pub fn low_level_randomization(&self) -> RandomizationConfig {
        match self.policy.low_variant {
            Some(v) => v.randomization(&self.randomization),
            None => self.randomization.clone(),
        }
    }

    /// Name of the low-level variant the training flags correspond to.
    pub fn low_variant_name(&self) -> &'static str {
        let flags = self.low_level_randomization().enabled;
        let dynamics_only = RandomizationFlags {
            high_level_noise: false,
            object_dims: false,
            ..flags
        };
        LowLevelVariant::ALL
            .into_iter()
            .find(|v| v.flags() == dynamics_only)
            .map_or("custom", |v| v.name())
    }
}

/// Sets `path` (segments joined by `__`, case-insensitive) in `table`.
fn apply_override(table: &mut toml::Table, path: &str, raw: &str) -> Result<(), CliError> {
    let keys: Vec<String> = path.split("__").map(|k| k.to_ascii_lowercase()).collect();
    if keys.iter().any(String::is_empty) {
        return Err(CliError::Config(format!("malformed override {ENV_PREFIX}{path}")));
    }
    let value = parse_literal(raw);
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {ENV_PREFIX}{path}: '{k}' is not a table")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
