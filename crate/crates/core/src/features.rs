//! State encoding for the linear value functions, and online task discovery.
//!
//! A state is encoded as the stimulus activations `Fe` followed by one block
//! of Gaussian radial basis functions per coordinate. Each block is
//! normalized to sum to one. Tasks are discovered by leader clustering of the
//! salient `Fe` observations seen while wandering.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{self, Action, ArenaSpec, Position, TaskSpec};
use crate::error::{Error, Result};
use crate::vector;

/// Kernels further than this many widths from a position are treated as
/// zero. `exp(-32)` is below 1e-13, so the truncation is invisible after
/// normalization at double precision.
const RBF_CUTOFF_WIDTHS: f64 = 8.0;

/// Stimulus activations at a position, each in `(0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fe(pub Vec<f64>);

impl Fe {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbfConfig {
    /// Basis functions per state dimension.
    pub per_dimension: usize,
    /// Kernel width as a multiple of the spacing between centers.
    pub width_factor: f64,
}

impl Default for RbfConfig {
    fn default() -> Self {
        RbfConfig {
            per_dimension: 100,
            width_factor: 1.5,
        }
    }
}

/// A feature vector with its non-zero support, so the learner can skip the
/// empty stretches of the RBF blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    active: Vec<u32>,
    // `active` as maximal runs of consecutive indices, [start, end).
    spans: Vec<(u32, u32)>,
}

impl FeatureVector {
    pub fn from_dense(values: Vec<f64>) -> Self {
        let mut v = FeatureVector::zeros(values.len());
        for (i, &x) in values.iter().enumerate() {
            if x != 0.0 {
                v.push(i, x);
            }
        }
        v
    }

    pub fn zeros(len: usize) -> Self {
        FeatureVector {
            values: vec![0.0; len],
            active: Vec::new(),
            spans: Vec::new(),
        }
    }

    /// One-hot vector on index `i`.
    pub fn unit(len: usize, i: usize) -> Self {
        let mut v = FeatureVector::zeros(len);
        v.push(i, 1.0);
        v
    }

    // Indices must arrive in ascending order.
    fn push(&mut self, i: usize, value: f64) {
        self.values[i] = value;
        self.active.push(i as u32);
        let i = i as u32;
        match self.spans.last_mut() {
            Some(last) if last.1 == i => last.1 = i + 1,
            _ => self.spans.push((i, i + 1)),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Indices of the non-zero entries, ascending.
    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Sparse dot product with a dense block of the same length.
    #[inline]
    pub fn dot(&self, block: &[f64]) -> f64 {
        debug_assert_eq!(block.len(), self.values.len());
        let mut acc = [0.0f64; 4];
        let mut tail = 0.0;
        for &(s, e) in &self.spans {
            let (s, e) = (s as usize, e as usize);
            let w = block[s..e].chunks_exact(4);
            let v = self.values[s..e].chunks_exact(4);
            for (a, b) in w.remainder().iter().zip(v.remainder()) {
                tail += a * b;
            }
            for (a, b) in w.zip(v) {
                for k in 0..4 {
                    acc[k] += a[k] * b[k];
                }
            }
        }
        (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
    }

    fn clear(&mut self) {
        for &i in &self.active {
            self.values[i as usize] = 0.0;
        }
        self.active.clear();
        self.spans.clear();
    }
}

/// Encodes positions of one arena as `Fe ∥ Fa(x) ∥ Fa(y)`.
#[derive(Clone, Debug)]
pub struct Featurizer {
    arena: ArenaSpec,
    rbf: RbfConfig,
    x_axis: RbfAxis,
    y_axis: RbfAxis,
}

#[derive(Clone, Debug)]
struct RbfAxis {
    count: usize,
    spacing: f64,
    width: f64,
}

impl RbfAxis {
    fn new(extent: f64, count: usize, width_factor: f64) -> Self {
        let spacing = extent / (count - 1) as f64;
        RbfAxis {
            count,
            spacing,
            width: width_factor * spacing,
        }
    }

    fn center(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    /// Writes the normalized block for coordinate `v` starting at `offset`.
    fn encode(&self, v: f64, offset: usize, out: &mut FeatureVector) {
        let reach = RBF_CUTOFF_WIDTHS * self.width;
        let lo = ((v - reach) / self.spacing).ceil().max(0.0) as usize;
        let hi = (((v + reach) / self.spacing).floor() as usize).min(self.count - 1);
        let start = out.active.len();
        let mut total = 0.0;
        let inv = 1.0 / (2.0 * self.width * self.width);
        // Consecutive Gaussians differ by a ratio that itself changes by a
        // constant factor, so two exponentials cover the whole window.
        let d = v - self.center(lo);
        let mut k = (-d * d * inv).exp();
        let mut ratio = (inv * self.spacing * (2.0 * d - self.spacing)).exp();
        let shrink = (-2.0 * inv * self.spacing * self.spacing).exp();
        for i in lo..=hi {
            out.push(offset + i, k);
            total += k;
            k *= ratio;
            ratio *= shrink;
        }
        for &i in &out.active[start..] {
            out.values[i as usize] /= total;
        }
    }
}

impl Featurizer {
    pub fn new(arena: &ArenaSpec, rbf: &RbfConfig) -> Result<Self> {
        if rbf.per_dimension < 2 {
            return Err(Error::config("rbf.per_dimension must be at least 2"));
        }
        if !(rbf.width_factor > 0.0) {
            return Err(Error::config("rbf.width_factor must be positive"));
        }
        Ok(Featurizer {
            arena: arena.clone(),
            rbf: rbf.clone(),
            x_axis: RbfAxis::new(arena.width, rbf.per_dimension, rbf.width_factor),
            y_axis: RbfAxis::new(arena.height, rbf.per_dimension, rbf.width_factor),
        })
    }

    pub fn arena(&self) -> &ArenaSpec {
        &self.arena
    }

    pub fn stimulus_count(&self) -> usize {
        self.arena.stimuli.len()
    }

    /// `|Fe| + 2 * per_dimension`.
    pub fn len(&self) -> usize {
        self.stimulus_count() + 2 * self.rbf.per_dimension
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// RBF center of basis function `i` along x.
    pub fn x_center(&self, i: usize) -> f64 {
        self.x_axis.center(i)
    }

    pub fn y_center(&self, i: usize) -> f64 {
        self.y_axis.center(i)
    }

    pub fn featurize(&self, p: &Position, fe: &Fe) -> Result<FeatureVector> {
        let mut out = FeatureVector::zeros(self.len());
        self.featurize_into(p, fe, &mut out)?;
        Ok(out)
    }

    /// Featurize `p` using its own stimulus activations.
    pub fn encode(&self, p: &Position) -> Result<FeatureVector> {
        let fe = env::stimulus_vector(p, &self.arena);
        self.featurize(p, &fe)
    }

    pub fn encode_into(&self, p: &Position, out: &mut FeatureVector) -> Result<()> {
        self.check_position(p)?;
        self.reset(out);
        for (k, s) in self.arena.stimuli.iter().enumerate() {
            out.push(k, (-p.distance_sq(&s.center) / (2.0 * s.spread * s.spread)).exp());
        }
        self.encode_position_blocks(p, out);
        Ok(())
    }

    pub fn featurize_into(&self, p: &Position, fe: &Fe, out: &mut FeatureVector) -> Result<()> {
        self.check_position(p)?;
        if fe.len() != self.stimulus_count() {
            return Err(Error::contract(format!(
                "Fe has {} entries, arena has {} stimuli",
                fe.len(),
                self.stimulus_count()
            )));
        }
        self.reset(out);
        for (k, &v) in fe.0.iter().enumerate() {
            out.push(k, v);
        }
        self.encode_position_blocks(p, out);
        Ok(())
    }

    fn check_position(&self, p: &Position) -> Result<()> {
        if !(p.x.is_finite() && p.y.is_finite()) || !self.arena.in_bounds(p) {
            return Err(Error::contract(format!("position ({}, {}) outside the arena", p.x, p.y)));
        }
        Ok(())
    }

    fn reset(&self, out: &mut FeatureVector) {
        if out.values.len() != self.len() {
            *out = FeatureVector::zeros(self.len());
        } else {
            out.clear();
        }
    }

    fn encode_position_blocks(&self, p: &Position, out: &mut FeatureVector) {
        let n_s = self.stimulus_count();
        self.x_axis.encode(p.x, n_s, out);
        self.y_axis.encode(p.y, n_s + self.rbf.per_dimension, out);
    }
}

/// Online leader clustering over `Fe` observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub threshold: f64,
    pub means: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

impl ClusterState {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(Error::config("cluster threshold must be positive"));
        }
        Ok(ClusterState {
            threshold,
            means: Vec::new(),
            counts: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Assigns `fe` to the nearest cluster if it lies within the threshold,
    /// otherwise opens a new cluster. Returns the cluster id.
    pub fn observe(&mut self, fe: &Fe) -> usize {
        let nearest = self
            .means
            .iter()
            .enumerate()
            .map(|(i, m)| (i, vector::euclidean(m, &fe.0)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match nearest {
            Some((i, d)) if d < self.threshold => {
                self.counts[i] += 1;
                let n = self.counts[i] as f64;
                for (m, v) in self.means[i].iter_mut().zip(&fe.0) {
                    *m += (v - *m) / n;
                }
                i
            }
            _ => {
                self.means.push(fe.0.clone());
                self.counts.push(1);
                self.means.len() - 1
            }
        }
    }
}

/// Reward and goal-size defaults for discovered tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardSpec {
    pub goal_radius: f64,
    pub goal_reward: f64,
    pub obstacle_penalty: f64,
    pub living_penalty: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec {
            goal_radius: 2.0,
            goal_reward: 100.0,
            obstacle_penalty: -100.0,
            living_penalty: -10.0,
        }
    }
}

/// Resolution of the goal-recovery grid search, in length units.
pub const GOAL_SEARCH_RESOLUTION: f64 = 0.1;

/// Builds the navigation task whose goal is the free arena position whose
/// stimulus signature is most cosine-similar to `mean`.
pub fn cluster_to_task(mean: &Fe, arena: &ArenaSpec, rewards: &RewardSpec) -> Result<TaskSpec> {
    if mean.len() != arena.stimulus_count() {
        return Err(Error::contract("cluster mean length differs from the stimulus count"));
    }
    if vector::norm(&mean.0) == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let nx = (arena.width / GOAL_SEARCH_RESOLUTION).round() as usize;
    let ny = (arena.height / GOAL_SEARCH_RESOLUTION).round() as usize;
    let mut best: Option<(f64, Position)> = None;
    for i in 0..=nx {
        for j in 0..=ny {
            let p = Position::new(
                (i as f64 * GOAL_SEARCH_RESOLUTION).min(arena.width),
                (j as f64 * GOAL_SEARCH_RESOLUTION).min(arena.height),
            );
            if arena.in_obstacle(&p) {
                continue;
            }
            let Some(c) = vector::cosine(&env::stimulus_vector(&p, arena).0, &mean.0) else {
                continue;
            };
            if best.is_none_or(|(b, _)| c > b) {
                best = Some((c, p));
            }
        }
    }
    let (_, goal_center) = best.ok_or_else(|| Error::config("no free position to place a goal"))?;
    Ok(TaskSpec {
        name: String::new(),
        goal_center,
        goal_radius: rewards.goal_radius,
        goal_reward: rewards.goal_reward,
        obstacle_penalty: rewards.obstacle_penalty,
        living_penalty: rewards.living_penalty,
        fe_signature: mean.0.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    /// Leader-clustering distance threshold.
    pub threshold: f64,
    /// An observation is clustered if some stimulus activation reaches this
    /// level...
    pub salience: f64,
    /// ...or if at least two activations reach this one.
    pub co_salience: f64,
    /// Length of the exploratory random walk.
    pub walk_steps: usize,
    /// Clusters with fewer members are dropped as noise.
    pub min_count: usize,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            threshold: 0.3,
            salience: 0.9,
            co_salience: 0.6,
            walk_steps: 100_000,
            min_count: 20,
        }
    }
}

/// A configuration worth clustering: one stimulus clearly present, or two
/// present together.
pub fn is_salient(fe: &Fe, cfg: &DiscoveryConfig) -> bool {
    fe.0.iter().any(|&v| v >= cfg.salience) || fe.0.iter().filter(|&&v| v >= cfg.co_salience).count() >= 2
}

/// Uniform random walk that clusters every salient stimulus observation.
pub fn random_walk_clusters<R: Rng + ?Sized>(
    arena: &ArenaSpec,
    cfg: &DiscoveryConfig,
    rng: &mut R,
) -> Result<ClusterState> {
    let mut clusters = ClusterState::new(cfg.threshold)?;
    // The walk has no goal; a task far outside the arena never terminates it.
    let wander = TaskSpec {
        name: String::new(),
        goal_center: Position::new(-1e9, -1e9),
        goal_radius: 1.0,
        goal_reward: 1.0,
        obstacle_penalty: -1.0,
        living_penalty: -1.0,
        fe_signature: Vec::new(),
    };
    let mut p = env::sample_start(arena, &wander, rng)?;
    for _ in 0..cfg.walk_steps {
        let a = Action::ALL[rng.random_range(0..Action::COUNT)];
        p = env::step(p, a, &wander, arena)?.next;
        let fe = env::stimulus_vector(&p, arena);
        if is_salient(&fe, cfg) {
            clusters.observe(&fe);
        }
    }
    Ok(clusters)
}

/// Discovers tasks by wandering the arena; one task per sufficiently
/// populated cluster, in order of discovery.
pub fn discover_tasks<R: Rng + ?Sized>(
    arena: &ArenaSpec,
    cfg: &DiscoveryConfig,
    rewards: &RewardSpec,
    rng: &mut R,
) -> Result<Vec<TaskSpec>> {
    let clusters = random_walk_clusters(arena, cfg, rng)?;
    clusters
        .means
        .iter()
        .zip(&clusters.counts)
        .filter(|(_, &n)| n >= cfg.min_count)
        .enumerate()
        .map(|(k, (mean, _))| {
            let mut task = cluster_to_task(&Fe(mean.clone()), arena, rewards)?;
            task.name = format!("discovered-{}", k + 1);
            Ok(task)
        })
        .collect()
}
