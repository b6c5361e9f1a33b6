use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{self, Action, Position, TaskSpec};
use crate::error::{Error, Result};
use crate::features::Featurizer;
use crate::gsom::{KnowledgeBase, SomMap};
use crate::qlearn::{self, QLambda, WeightVector};
use crate::transfer::{Advisor, MIN_TARGET_NORM};

use super::config::ExperimentConfig;

/// Exploration strategy of a curriculum run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Follow the most similar stored task with probability ε.
    SomGuided,
    /// Take a uniformly random action with probability ε.
    EpsilonGreedy,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::SomGuided, Strategy::EpsilonGreedy];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::SomGuided => "som_guided",
            Strategy::EpsilonGreedy => "epsilon_greedy",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "som_guided" => Ok(Strategy::SomGuided),
            "epsilon_greedy" => Ok(Strategy::EpsilonGreedy),
            other => Err(Error::config(format!("unknown strategy {other:?}"))),
        }
    }
}

// Independent random streams of one run, so that e.g. the evaluation
// starts do not depend on how much randomness learning consumed.
const LEARN_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;
const SOM_STREAM: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Metrics of one task within a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskMetrics {
    /// One-based position in the curriculum.
    pub task: usize,
    pub name: String,
    /// Evaluated greedy return after every episode.
    pub returns: Vec<f64>,
    /// Best node similarity of the target weights after every episode; NaN
    /// while the weights are still zero.
    pub similarity: Vec<f64>,
    /// Seconds spent on every episode, evaluation included.
    pub wall_clock: Vec<f64>,
    /// Learning steps taken in every episode.
    pub steps: Vec<usize>,
    pub weights: WeightVector,
    /// Map size once this task has been integrated.
    pub node_count: usize,
}

/// Everything recorded for one (strategy, seed) run.
#[derive(Clone, Debug)]
pub struct RunMetrics {
    pub run: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub tasks: Vec<TaskMetrics>,
    /// Node count before the first task and after each integrated task.
    pub node_counts: Vec<usize>,
    pub map: SomMap,
    /// Set when the learner diverged; `tasks` then holds the completed tasks.
    pub failure: Option<String>,
}

/// Learns `tasks` in order, integrating each learned weight vector into the
/// map before the next task starts.
pub fn run_curriculum(
    cfg: &ExperimentConfig,
    tasks: &[TaskSpec],
    strategy: Strategy,
    run: usize,
    seed: u64,
) -> Result<RunMetrics> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::config("curriculum has no tasks"));
    }
    for t in tasks {
        t.validate(&cfg.arena)?;
    }
    let featurizer = Featurizer::new(&cfg.arena, &cfg.rbf)?;
    let dim = featurizer.len() * Action::COUNT;
    let mut learn_rng = stream(seed, LEARN_STREAM);
    let mut eval_rng = stream(seed, EVAL_STREAM);
    let mut som_rng = stream(seed, SOM_STREAM);

    let mut kb = KnowledgeBase::new(SomMap::random(
        cfg.gsom.initial_rows,
        cfg.gsom.initial_cols,
        dim,
        &mut som_rng,
    )?);
    let mut metrics = RunMetrics {
        run,
        seed,
        strategy,
        tasks: Vec::with_capacity(tasks.len()),
        node_counts: vec![kb.map().len()],
        map: kb.map().clone(),
        failure: None,
    };

    for (k, task) in tasks.iter().enumerate() {
        let starts = (0..cfg.evaluation.n_starts)
            .map(|_| env::sample_start(&cfg.arena, task, &mut eval_rng))
            .collect::<Result<Vec<Position>>>()?;
        // The first task has no stored knowledge to draw on, so both
        // strategies explore it identically.
        let guided = strategy == Strategy::SomGuided && k > 0;
        match learn_task(cfg, &featurizer, task, &starts, kb.map(), guided, &mut learn_rng) {
            Ok(mut tm) => {
                tm.task = k + 1;
                if tm.weights.norm() > 0.0 {
                    kb.store(&tm.weights, &cfg.gsom, &mut som_rng)?;
                }
                tm.node_count = kb.map().len();
                metrics.node_counts.push(kb.map().len());
                metrics.tasks.push(tm);
            }
            Err(Error::Divergence(msg)) => {
                metrics.failure = Some(format!("task {}: {msg}", k + 1));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    metrics.map = kb.into_map();
    Ok(metrics)
}

fn learn_task(
    cfg: &ExperimentConfig,
    featurizer: &Featurizer,
    task: &TaskSpec,
    starts: &[Position],
    map: &SomMap,
    guided: bool,
    rng: &mut ChaCha8Rng,
) -> Result<TaskMetrics> {
    let episodes = cfg.curriculum.episodes_per_task;
    let mut learner = QLambda::new(cfg.qlearn.clone(), featurizer.len() * Action::COUNT)?;
    let mut advisor = Advisor::new(cfg.transfer.clone())?;
    let mut tm = TaskMetrics {
        task: 0,
        name: task.name.clone(),
        returns: Vec::with_capacity(episodes),
        similarity: Vec::with_capacity(episodes),
        wall_clock: Vec::with_capacity(episodes),
        steps: Vec::with_capacity(episodes),
        weights: WeightVector::zeros(0),
        node_count: 0,
    };
    let epsilon = cfg.qlearn.epsilon;
    for _ in 0..episodes {
        let clock = Instant::now();
        let start = env::sample_start(&cfg.arena, task, rng)?;
        let stats = if guided {
            advisor.begin_episode(map, &learner.weights, rng)?;
            qlearn::run_episode(&mut learner, task, featurizer, start, cfg.curriculum.max_steps, rng, |_, f, g, r| {
                advisor.act_with_greedy(g, f, r)
            })?
        } else {
            qlearn::run_episode(&mut learner, task, featurizer, start, cfg.curriculum.max_steps, rng, |_, _, g, r| {
                Ok(explore(g, epsilon, r))
            })?
        };
        tm.steps.push(stats.steps);
        tm.returns.push(qlearn::evaluate_from(
            &learner.weights,
            task,
            featurizer,
            starts,
            cfg.evaluation.horizon,
            cfg.evaluation.gamma,
        )?);
        tm.similarity.push(if learner.weights.norm() > MIN_TARGET_NORM {
            map.best_match(learner.weights.as_slice())?.1
        } else {
            f64::NAN
        });
        tm.wall_clock.push(clock.elapsed().as_secs_f64());
    }
    tm.weights = learner.weights;
    Ok(tm)
}

/// Uniformly random action with probability `epsilon`, greedy otherwise.
pub fn epsilon_greedy<R: Rng + ?Sized>(
    w: &WeightVector,
    f: &crate::features::FeatureVector,
    epsilon: f64,
    rng: &mut R,
) -> Result<Action> {
    Ok(explore(qlearn::greedy_action(w, f)?, epsilon, rng))
}

fn explore<R: Rng + ?Sized>(greedy: Action, epsilon: f64, rng: &mut R) -> Action {
    if rng.random::<f64>() < epsilon {
        Action::ALL[rng.random_range(0..Action::COUNT)]
    } else {
        greedy
    }
}

/// Runs every (strategy, run) combination of the configured curriculum.
pub fn run_experiment(cfg: &ExperimentConfig, strategies: &[Strategy]) -> Result<Vec<RunMetrics>> {
    let tasks = cfg.curriculum_tasks(cfg.curriculum.seed)?;
    let mut out = Vec::new();
    for run in 0..cfg.curriculum.runs {
        let seed = cfg.curriculum.seed + run as u64;
        for &s in strategies {
            out.push(run_curriculum(cfg, &tasks, s, run, seed)?);
        }
    }
    Ok(out)
}
