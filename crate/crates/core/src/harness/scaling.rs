use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsom::{GsomConfig, KnowledgeBase, SomMap};
use crate::qlearn::WeightVector;
use crate::vector;

use super::config::ScalingConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub g_t: f64,
    pub task_count: usize,
    pub node_count: usize,
}

impl ScalingRecord {
    pub fn nodes_per_task(&self) -> f64 {
        self.node_count as f64 / self.task_count as f64
    }
}

const FAMILY_STREAM: u64 = 11;
const SOM_STREAM: u64 = 12;

fn unit_gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = vector::norm(&v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Stand-in task vectors: each task picks one of `families` random unit
/// directions, adds isotropic Gaussian noise of expected norm `noise` and is
/// renormalized.
pub struct SyntheticTasks {
    families: Vec<Vec<f64>>,
    noise: f64,
    rng: ChaCha8Rng,
}

impl SyntheticTasks {
    pub fn new(cfg: &ScalingConfig) -> Result<Self> {
        if cfg.families == 0 || cfg.dim == 0 || !(cfg.noise >= 0.0) {
            return Err(Error::config("synthetic tasks need families >= 1, dim >= 1 and noise >= 0"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(FAMILY_STREAM);
        let families = (0..cfg.families).map(|_| unit_gaussian(cfg.dim, &mut rng)).collect();
        Ok(SyntheticTasks {
            families,
            noise: cfg.noise,
            rng,
        })
    }

    pub fn family(&self, k: usize) -> &[f64] {
        &self.families[k]
    }

    /// The next task and the family it was drawn from.
    pub fn next_task(&mut self) -> (usize, WeightVector) {
        let k = self.rng.random_range(0..self.families.len());
        let dim = self.families[k].len();
        let scale = self.noise / (dim as f64).sqrt();
        loop {
            let v: Vec<f64> = self.families[k]
                .iter()
                .map(|&x| x + scale * self.rng.sample::<f64, _>(StandardNormal))
                .collect();
            let n = vector::norm(&v);
            if n > 0.0 {
                return (k, WeightVector::from_vec(v.into_iter().map(|x| x / n).collect()));
            }
        }
    }
}

/// Integrates the same synthetic task stream into a fresh map for every
/// growth threshold and records the node count at each checkpoint.
pub fn scaling_study(cfg: &ScalingConfig, gsom: &GsomConfig) -> Result<Vec<ScalingRecord>> {
    let mut checkpoints = cfg.checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let n_tasks = checkpoints.last().copied().unwrap_or(0);
    let mut generator = SyntheticTasks::new(cfg)?;
    let tasks: Vec<WeightVector> = (0..n_tasks).map(|_| generator.next_task().1).collect();

    let mut records = Vec::with_capacity(cfg.growth_thresholds.len() * checkpoints.len());
    for &g_t in &cfg.growth_thresholds {
        let gcfg = GsomConfig {
            growth_threshold: g_t,
            ..gsom.clone()
        };
        gcfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(SOM_STREAM);
        let map = SomMap::random(gcfg.initial_rows, gcfg.initial_cols, cfg.dim, &mut rng)?;
        let mut kb = KnowledgeBase::new(map);
        let mut next = checkpoints.iter().peekable();
        for (i, w) in tasks.iter().enumerate() {
            kb.store(w, &gcfg, &mut rng)?;
            if next.peek() == Some(&&(i + 1)) {
                next.next();
                records.push(ScalingRecord {
                    g_t,
                    task_count: i + 1,
                    node_count: kb.map().len(),
                });
            }
        }
    }
    Ok(records)
}
