//! Growing self-organizing map over value-function weight vectors.
//!
//! Nodes sit on a rectangular grid. Winners are chosen by cosine similarity,
//! so tasks whose value functions differ only in scale map to the same node.
//! Every presentation adds `1 - c` to the winner's accumulated error; when
//! the total error rises faster than the growth threshold, a full row or
//! column is appended next to the boundary node with the largest error.
//!
//! New knowledge is integrated by retraining on the current node weights
//! plus the new task's weights, so the original task vectors never need to
//! be kept.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qlearn::WeightVector;
use crate::vector;

/// Cosine similarity between two non-zero vectors.
pub fn cosine_similarity(a: &WeightVector, b: &WeightVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::contract(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    vector::cosine(a.as_slice(), b.as_slice()).ok_or(Error::ZeroNorm)
}

/// Shape of the neighbourhood function `h(d)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodKernel {
    /// `exp(-d² / 2σ²)`.
    #[default]
    Gaussian,
    /// `exp(-d / 2σ²)`, with the grid distance unsquared.
    Unsquared,
}

/// How the learning-rate time constant `tau2` is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSchedule {
    /// `kappa0 * exp(-tau2 * i / iterations)`: `tau2` is the decay exponent
    /// accumulated over a whole run, so the rate ends at `exp(-tau2)` of its
    /// initial value.
    #[default]
    RunExponent,
    /// `kappa0 * tau2^(i / iterations)`: the rate decays to the fraction
    /// `tau2` of its initial value by the end of the run.
    FinalFraction,
    /// The decay constant is `tau2 * iterations`.
    FractionOfRun,
    /// The decay constant is `tau2` iterations.
    Iterations,
}

/// Span over which the increase of the total error is measured before it is
/// compared with the growth threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthWindow {
    /// One presentation per check.
    Iteration,
    /// As many presentations as there are inputs, i.e. one stochastic epoch.
    Epoch,
    /// Checked after every presentation against the total error at the last
    /// growth (or the start of training).
    #[default]
    SinceGrowth,
}

/// Order in which training inputs are presented, one per iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputOrder {
    /// Independent uniform draws.
    Random,
    /// Passes over a fresh random permutation, so every input is seen once
    /// per pass.
    #[default]
    Shuffled,
}

struct InputSampler {
    order: Vec<usize>,
    cursor: usize,
    mode: InputOrder,
}

impl InputSampler {
    fn new(n: usize, mode: InputOrder) -> Self {
        InputSampler { order: (0..n).collect(), cursor: n, mode }
    }

    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        match self.mode {
            InputOrder::Random => rng.random_range(0..self.order.len()),
            InputOrder::Shuffled => {
                if self.cursor == self.order.len() {
                    self.order.shuffle(rng);
                    self.cursor = 0;
                }
                self.cursor += 1;
                self.order[self.cursor - 1]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GsomConfig {
    pub initial_rows: usize,
    pub initial_cols: usize,
    /// Initial neighbourhood width, in grid units.
    pub sigma0: f64,
    pub tau1: f64,
    pub kappa0: f64,
    pub tau2: f64,
    pub rate_schedule: RateSchedule,
    pub growth_threshold: f64,
    pub growth_window: GrowthWindow,
    pub input_order: InputOrder,
    pub iterations: usize,
    pub kernel: NeighborhoodKernel,
}

impl Default for GsomConfig {
    fn default() -> Self {
        GsomConfig {
            initial_rows: 2,
            initial_cols: 2,
            sigma0: 50.0,
            tau1: 250.0,
            kappa0: 0.5,
            tau2: 0.1,
            rate_schedule: RateSchedule::RunExponent,
            growth_threshold: 0.3,
            growth_window: GrowthWindow::SinceGrowth,
            input_order: InputOrder::Shuffled,
            iterations: 1000,
            kernel: NeighborhoodKernel::Gaussian,
        }
    }
}

impl GsomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_rows == 0 || self.initial_cols == 0 {
            return Err(Error::config("initial map must have at least one row and column"));
        }
        let positive = [
            ("sigma0", self.sigma0),
            ("tau1", self.tau1),
            ("kappa0", self.kappa0),
            ("tau2", self.tau2),
            ("growth_threshold", self.growth_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::config(format!("gsom.{name} must be positive")));
            }
        }
        if self.iterations == 0 {
            return Err(Error::config("gsom.iterations must be positive"));
        }
        if self.kappa0 > 1.0 {
            return Err(Error::config("gsom.kappa0 must not exceed 1"));
        }
        Ok(())
    }

    pub fn initial_nodes(&self) -> usize {
        self.initial_rows * self.initial_cols
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.sigma0 * (-(i as f64) / self.tau1).exp()
    }

    pub fn kappa(&self, i: usize) -> f64 {
        let tau = match self.rate_schedule {
            RateSchedule::RunExponent => self.iterations as f64 / self.tau2,
            RateSchedule::FinalFraction => {
                return self.kappa0 * self.tau2.powf(i as f64 / self.iterations as f64);
            }
            RateSchedule::FractionOfRun => self.tau2 * self.iterations as f64,
            RateSchedule::Iterations => self.tau2,
        };
        self.kappa0 * (-(i as f64) / tau).exp()
    }

    fn neighborhood(&self, d_sq: f64, sigma: f64) -> f64 {
        let s2 = 2.0 * sigma * sigma;
        match self.kernel {
            NeighborhoodKernel::Gaussian => (-d_sq / s2).exp(),
            NeighborhoodKernel::Unsquared => (-d_sq.sqrt() / s2).exp(),
        }
    }
}

/// Side of the grid a new row or column is appended to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Top,
    Bottom,
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SomMap {
    rows: usize,
    cols: usize,
    dim: usize,
    /// Row-major node weights, `dim` values per node.
    weights: Vec<f64>,
    errors: Vec<f64>,
    /// Total error after every training iteration, across all training calls.
    error_history: Vec<f64>,
}

/// A view of one node.
#[derive(Clone, Copy, Debug)]
pub struct SomNode<'a> {
    pub row: usize,
    pub col: usize,
    pub weights: &'a [f64],
    pub error: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub growth_events: Vec<(usize, Side)>,
    pub final_total_error: f64,
}

impl SomMap {
    /// Grid of unit-norm random nodes.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, dim: usize, rng: &mut R) -> Result<Self> {
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(Error::config("map dimensions must be positive"));
        }
        let mut weights = Vec::with_capacity(rows * cols * dim);
        for _ in 0..rows * cols {
            let mut node: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = vector::norm(&node);
            node.iter_mut().for_each(|v| *v /= n);
            weights.extend(node);
        }
        Ok(SomMap {
            rows,
            cols,
            dim,
            weights,
            errors: vec![0.0; rows * cols],
            error_history: Vec::new(),
        })
    }

    /// Map from explicit row-major node weights.
    pub fn from_nodes(rows: usize, cols: usize, nodes: Vec<WeightVector>) -> Result<Self> {
        if rows == 0 || cols == 0 || nodes.len() != rows * cols {
            return Err(Error::contract("node count does not match grid shape"));
        }
        let dim = nodes[0].len();
        if dim == 0 || nodes.iter().any(|n| n.len() != dim) {
            return Err(Error::contract("nodes must share a positive dimension"));
        }
        Ok(SomMap {
            rows,
            cols,
            dim,
            weights: nodes.into_iter().flat_map(WeightVector::into_vec).collect(),
            errors: vec![0.0; rows * cols],
            error_history: Vec::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node_weights(&self, i: usize) -> &[f64] {
        &self.weights[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node(&self, i: usize) -> SomNode<'_> {
        SomNode {
            row: i / self.cols,
            col: i % self.cols,
            weights: self.node_weights(i),
            error: self.errors[i],
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = SomNode<'_>> {
        (0..self.len()).map(|i| self.node(i))
    }

    pub fn node_vectors(&self) -> Vec<WeightVector> {
        (0..self.len())
            .map(|i| WeightVector::from_vec(self.node_weights(i).to_vec()))
            .collect()
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn total_error(&self) -> f64 {
        self.errors.iter().sum()
    }

    pub fn error_history(&self) -> &[f64] {
        &self.error_history
    }

    pub fn grid_position(&self, i: usize) -> (usize, usize) {
        (i / self.cols, i % self.cols)
    }

    fn grid_distance_sq(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = self.grid_position(a);
        let (rb, cb) = self.grid_position(b);
        let dr = ra as f64 - rb as f64;
        let dc = ca as f64 - cb as f64;
        dr * dr + dc * dc
    }

    /// Euclidean distance between the grid coordinates of two nodes.
    pub fn grid_distance(&self, a: usize, b: usize) -> f64 {
        self.grid_distance_sq(a, b).sqrt()
    }

    /// Cosine similarity of `x` to every node; zero-norm nodes score `-inf`.
    pub fn similarities(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::contract(format!("vector length {} differs from map dimension {}", x.len(), self.dim)));
        }
        let nx = vector::norm(x);
        if nx == 0.0 || !nx.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok((0..self.len())
            .map(|i| {
                let (d, sq) = vector::dot_and_square(self.node_weights(i), x);
                let nw = sq.sqrt();
                if nw == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (d / (nw * nx)).clamp(-1.0, 1.0)
                }
            })
            .collect())
    }

    /// Index and similarity of the most cosine-similar node; ties go to the
    /// lowest row-major index.
    pub fn best_match(&self, x: &[f64]) -> Result<(usize, f64)> {
        let sims = self.similarities(x)?;
        let mut best = (0, sims[0]);
        for (i, &s) in sims.iter().enumerate().skip(1) {
            if s > best.1 {
                best = (i, s);
            }
        }
        Ok(best)
    }

    pub fn find_winner(&self, x: &WeightVector) -> Result<usize> {
        Ok(self.best_match(x.as_slice())?.0)
    }

    /// Trains on `inputs`, presenting one per iteration in `cfg.input_order`.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        inputs: &[WeightVector],
        cfg: &GsomConfig,
        rng: &mut R,
    ) -> Result<TrainReport> {
        cfg.validate()?;
        if inputs.is_empty() {
            return Err(Error::contract("training needs at least one input"));
        }
        for x in inputs {
            if x.len() != self.dim {
                return Err(Error::contract("input dimension differs from map dimension"));
            }
            if !(x.norm() > 0.0) || !x.is_finite() {
                return Err(Error::ZeroNorm);
            }
        }
        let (window, rebase_every_check) = match cfg.growth_window {
            GrowthWindow::Iteration => (1, true),
            GrowthWindow::Epoch => (inputs.len(), true),
            GrowthWindow::SinceGrowth => (1, false),
        };
        let mut report = TrainReport::default();
        let mut reference = self.total_error();
        let mut since_reference = 0;
        let mut sampler = InputSampler::new(inputs.len(), cfg.input_order);
        for i in 1..=cfg.iterations {
            let x = inputs[sampler.next(rng)].as_slice();
            let (win, c) = self.best_match(x)?;
            let sigma = cfg.sigma(i);
            let kappa = cfg.kappa(i);
            for j in 0..self.len() {
                let rate = kappa * cfg.neighborhood(self.grid_distance_sq(win, j), sigma);
                if rate == 0.0 {
                    continue;
                }
                let node = &mut self.weights[j * self.dim..(j + 1) * self.dim];
                for (w, xv) in node.iter_mut().zip(x) {
                    *w += rate * (xv - *w);
                }
            }
            self.errors[win] += 1.0 - c;
            let total = self.total_error();
            self.error_history.push(total);

            since_reference += 1;
            if since_reference >= window {
                let grew = (total - reference) / self.len() as f64 > cfg.growth_threshold;
                if grew {
                    let side = self.grow();
                    report.growth_events.push((i, side));
                }
                if grew || rebase_every_check {
                    reference = self.total_error();
                    since_reference = 0;
                }
            }
        }
        report.final_total_error = self.total_error();
        Ok(report)
    }

    /// Retrains on the current node weights plus `w_new`.
    pub fn integrate_task<R: Rng + ?Sized>(
        &mut self,
        w_new: &WeightVector,
        cfg: &GsomConfig,
        rng: &mut R,
    ) -> Result<TrainReport> {
        if !(w_new.norm() > 0.0) {
            return Err(Error::ZeroNorm);
        }
        let mut inputs = self.node_vectors();
        inputs.push(w_new.clone());
        self.train(&inputs, cfg, rng)
    }

    /// The boundary node with the largest accumulated error, and the outer
    /// side nearest to it. Side ties favour growing the shorter dimension,
    /// then top/left.
    pub fn growth_site(&self) -> (usize, Side) {
        let on_boundary =
            |r: usize, c: usize| r == 0 || c == 0 || r + 1 == self.rows || c + 1 == self.cols;
        let mut best: Option<usize> = None;
        for i in 0..self.len() {
            let (r, c) = self.grid_position(i);
            if on_boundary(r, c) && best.is_none_or(|b| self.errors[i] > self.errors[b]) {
                best = Some(i);
            }
        }
        let node = best.unwrap_or(0);
        let (r, c) = self.grid_position(node);
        let row_sides = [(r, Side::Top), (self.rows - 1 - r, Side::Bottom)];
        let col_sides = [(c, Side::Left), (self.cols - 1 - c, Side::Right)];
        let ordered: Vec<(usize, Side)> = if self.rows <= self.cols {
            row_sides.into_iter().chain(col_sides).collect()
        } else {
            col_sides.into_iter().chain(row_sides).collect()
        };
        let side = ordered
            .iter()
            .fold(ordered[0], |acc, &cand| if cand.0 < acc.0 { cand } else { acc })
            .1;
        (node, side)
    }

    /// Appends a row or column at the growth site. New nodes take the mean
    /// weights of their existing grid neighbours (8-neighbourhood) and the
    /// mean of the previous error vector.
    pub fn grow(&mut self) -> Side {
        let (_, side) = self.growth_site();
        self.grow_at(side);
        side
    }

    pub fn grow_at(&mut self, side: Side) {
        let mean_error = self.total_error() / self.len() as f64;
        let (new_rows, new_cols) = match side {
            Side::Top | Side::Bottom => (self.rows + 1, self.cols),
            Side::Left | Side::Right => (self.rows, self.cols + 1),
        };
        // Offset of the old grid inside the new one.
        let (dr, dc) = match side {
            Side::Top => (1, 0),
            Side::Left => (0, 1),
            _ => (0, 0),
        };
        let old_index = |r: usize, c: usize| -> Option<usize> {
            let r = r.checked_sub(dr)?;
            let c = c.checked_sub(dc)?;
            (r < self.rows && c < self.cols).then_some(r * self.cols + c)
        };
        let dim = self.dim;
        let mut weights = vec![0.0; new_rows * new_cols * dim];
        let mut errors = vec![0.0; new_rows * new_cols];
        for r in 0..new_rows {
            for c in 0..new_cols {
                let k = r * new_cols + c;
                let out = &mut weights[k * dim..(k + 1) * dim];
                if let Some(o) = old_index(r, c) {
                    out.copy_from_slice(self.node_weights(o));
                    errors[k] = self.errors[o];
                    continue;
                }
                let mut count = 0usize;
                for nr in r.saturating_sub(1)..=(r + 1).min(new_rows - 1) {
                    for nc in c.saturating_sub(1)..=(c + 1).min(new_cols - 1) {
                        if let Some(o) = old_index(nr, nc) {
                            for (v, w) in out.iter_mut().zip(self.node_weights(o)) {
                                *v += w;
                            }
                            count += 1;
                        }
                    }
                }
                debug_assert!(count > 0);
                out.iter_mut().for_each(|v| *v /= count as f64);
                errors[k] = mean_error;
            }
        }
        self.rows = new_rows;
        self.cols = new_cols;
        self.weights = weights;
        self.errors = errors;
    }

    pub fn save(&self, cfg: Option<&GsomConfig>, path: &Path) -> Result<()> {
        let file = MapFile {
            format: MAP_FORMAT.to_string(),
            version: MAP_VERSION,
            rows: self.rows,
            cols: self.cols,
            dim: self.dim,
            config: cfg.cloned(),
            weights: (0..self.len()).map(|i| self.node_weights(i).to_vec()).collect(),
            errors: self.errors.clone(),
        };
        let text = serde_json::to_string(&file).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(SomMap, Option<GsomConfig>)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let file: MapFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if file.format != MAP_FORMAT {
            return Err(bad(format!("unexpected format tag {:?}", file.format)));
        }
        if file.version != MAP_VERSION {
            return Err(bad(format!("unsupported version {}", file.version)));
        }
        let n = file.rows * file.cols;
        if n == 0 || file.weights.len() != n || file.errors.len() != n {
            return Err(bad("node count does not match grid shape".into()));
        }
        if file.weights.iter().any(|w| w.len() != file.dim) {
            return Err(bad("node dimension mismatch".into()));
        }
        let map = SomMap {
            rows: file.rows,
            cols: file.cols,
            dim: file.dim,
            weights: file.weights.into_iter().flatten().collect(),
            errors: file.errors,
            error_history: Vec::new(),
        };
        Ok((map, file.config))
    }
}

const MAP_FORMAT: &str = "somrl-map";
const MAP_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MapFile {
    format: String,
    version: u32,
    rows: usize,
    cols: usize,
    dim: usize,
    config: Option<GsomConfig>,
    weights: Vec<Vec<f64>>,
    errors: Vec<f64>,
}

/// A map used as a store of task weight vectors.
///
/// The initial random nodes carry no knowledge, so the first stored task is
/// trained on alone; every later task is integrated together with the
/// recycled node weights.
#[derive(Clone, Debug)]
pub struct KnowledgeBase {
    map: SomMap,
    stored: usize,
}

impl KnowledgeBase {
    pub fn new(map: SomMap) -> Self {
        KnowledgeBase { map, stored: 0 }
    }

    /// Wraps a map whose nodes already hold `stored` tasks.
    pub fn with_stored(map: SomMap, stored: usize) -> Self {
        KnowledgeBase { map, stored }
    }

    pub fn map(&self) -> &SomMap {
        &self.map
    }

    pub fn into_map(self) -> SomMap {
        self.map
    }

    pub fn stored(&self) -> usize {
        self.stored
    }

    pub fn store<R: Rng + ?Sized>(&mut self, w: &WeightVector, cfg: &GsomConfig, rng: &mut R) -> Result<TrainReport> {
        let report = if self.stored == 0 {
            self.map.train(std::slice::from_ref(w), cfg, rng)?
        } else {
            self.map.integrate_task(w, cfg, rng)?
        };
        self.stored += 1;
        Ok(report)
    }
}
