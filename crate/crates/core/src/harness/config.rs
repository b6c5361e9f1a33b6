use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{self, ArenaSpec, TaskSpec};
use crate::error::{Error, Result};
use crate::features::{self, DiscoveryConfig, Featurizer, RbfConfig, RewardSpec};
use crate::gsom::GsomConfig;
use crate::qlearn::QLambdaConfig;
use crate::transfer::TransferPolicyConfig;

/// The built-in experiment configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../../config/default.toml");

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "SOMRL_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    pub episodes_per_task: usize,
    pub runs: usize,
    /// Learning episodes are cut off after this many steps.
    pub max_steps: usize,
    /// Run `r` uses seed `seed + r`.
    pub seed: u64,
    /// Zero-based task indices in learning order; empty means listed order.
    pub order: Vec<usize>,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig {
            episodes_per_task: 1000,
            runs: 10,
            max_steps: 2000,
            seed: 0,
            order: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Greedy rollouts per evaluation, one from each fixed start.
    pub n_starts: usize,
    /// Steps per rollout.
    pub horizon: usize,
    /// Discount applied to evaluation returns.
    pub gamma: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            n_starts: 100,
            horizon: 100,
            gamma: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub growth_thresholds: Vec<f64>,
    /// Task counts at which the node count is recorded; the largest is the
    /// number of tasks integrated.
    pub checkpoints: Vec<usize>,
    /// Latent task families of the synthetic generator.
    pub families: usize,
    /// Standard deviation of the per-task perturbation of a unit family
    /// direction.
    pub noise: f64,
    /// Length of the synthetic task vectors. Smaller than a real weight
    /// vector to keep the 1000-task study short.
    pub dim: usize,
    pub seed: u64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            growth_thresholds: vec![0.1, 0.3, 0.5],
            checkpoints: vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000],
            families: 10,
            noise: 0.1,
            dim: 256,
            seed: 0,
        }
    }
}

impl ScalingConfig {
    pub fn max_tasks(&self) -> usize {
        self.checkpoints.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Trailing moving-average window for smoothed curves, in episodes.
    pub smoothing_window: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("results"),
            smoothing_window: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub arena: ArenaSpec,
    /// Tasks in numbering order. When empty, tasks are discovered.
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub discovery: DiscoveryConfig,
    /// Goal size and rewards of discovered tasks.
    #[serde(default)]
    pub rewards: RewardSpec,
    #[serde(default)]
    pub rbf: RbfConfig,
    #[serde(default)]
    pub qlearn: QLambdaConfig,
    #[serde(default)]
    pub gsom: GsomConfig,
    #[serde(default)]
    pub transfer: TransferPolicyConfig,
    #[serde(default)]
    pub curriculum: CurriculumConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::from_toml(DEFAULT_CONFIG).expect("built-in configuration is valid")
    }
}

impl ExperimentConfig {
    /// Parses and validates a configuration. Empty task signatures are filled
    /// in from the goal centres.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.fill_signatures();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    fn fill_signatures(&mut self) {
        for task in &mut self.tasks {
            if task.fe_signature.is_empty() {
                task.fe_signature = env::stimulus_vector(&task.goal_center, &self.arena).0;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arena.validate()?;
        for task in &self.tasks {
            task.validate(&self.arena)?;
            if task.fe_signature.len() != self.arena.stimulus_count() {
                return Err(Error::config(format!(
                    "task {:?}: fe_signature has {} entries for {} stimuli",
                    task.name,
                    task.fe_signature.len(),
                    self.arena.stimulus_count()
                )));
            }
        }
        self.qlearn.validate()?;
        self.gsom.validate()?;
        self.transfer.validate()?;
        let c = &self.curriculum;
        if c.episodes_per_task == 0 || c.runs == 0 || c.max_steps == 0 {
            return Err(Error::config("curriculum episodes_per_task, runs and max_steps must be at least 1"));
        }
        if !c.order.is_empty() && !self.tasks.is_empty() && c.order.iter().any(|&k| k >= self.tasks.len()) {
            return Err(Error::config("curriculum.order refers to a task that does not exist"));
        }
        let e = &self.evaluation;
        if e.n_starts == 0 || e.horizon == 0 {
            return Err(Error::config("evaluation n_starts and horizon must be at least 1"));
        }
        if !(0.0..=1.0).contains(&e.gamma) {
            return Err(Error::config("evaluation.gamma must lie in [0, 1]"));
        }
        let s = &self.scaling;
        if s.growth_thresholds.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::config("scaling growth thresholds must be positive"));
        }
        if s.checkpoints.contains(&0) {
            return Err(Error::config("scaling checkpoints must be at least 1"));
        }
        if s.families == 0 || s.dim == 0 || !(s.noise >= 0.0) {
            return Err(Error::config("scaling needs families >= 1, dim >= 1 and noise >= 0"));
        }
        if self.output.smoothing_window == 0 {
            return Err(Error::config("output.smoothing_window must be at least 1"));
        }
        Featurizer::new(&self.arena, &self.rbf)?;
        Ok(())
    }

    /// Output directory, honouring the environment override.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output.dir.clone(),
        }
    }

    /// The tasks to learn, in curriculum order. Configured tasks are used
    /// as listed; otherwise they are discovered with a walk seeded by `seed`.
    pub fn curriculum_tasks(&self, seed: u64) -> Result<Vec<TaskSpec>> {
        let tasks = if self.tasks.is_empty() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(DISCOVERY_STREAM);
            features::discover_tasks(&self.arena, &self.discovery, &self.rewards, &mut rng)?
        } else {
            self.tasks.clone()
        };
        if tasks.is_empty() {
            return Err(Error::config("no tasks configured or discovered"));
        }
        if self.curriculum.order.is_empty() {
            return Ok(tasks);
        }
        self.curriculum
            .order
            .iter()
            .map(|&k| {
                tasks
                    .get(k)
                    .cloned()
                    .ok_or_else(|| Error::config(format!("curriculum.order index {k} out of range")))
            })
            .collect()
    }
}

pub(crate) const DISCOVERY_STREAM: u64 = 7;
