//! Checks shared by the property suites and the acceptance run. Each returns
//! `Err` with a description of the first violation.

#![allow(dead_code, clippy::needless_range_loop)]

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use somrl::env::Action;
use somrl::features::FeatureVector;
use somrl::gsom::{cosine_similarity, GrowthWindow, GsomConfig, Side, SomMap};
use somrl::harness::config::ExperimentConfig;
use somrl::harness::curriculum::{run_experiment, Strategy};
use somrl::harness::output;
use somrl::qlearn::{self, q_lambda_step, Outcome, QLambdaConfig, Traces};
use somrl::transfer::{select_source, som_guided_action, Advisor, TransferPolicyConfig};
use somrl::WeightVector;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// A non-zero Gaussian vector.
pub fn nonzero(dim: usize, rng: &mut impl Rng) -> WeightVector {
    loop {
        let v = gaussian(dim, rng);
        if v.iter().any(|&x| x != 0.0) {
            return WeightVector::from_vec(v);
        }
    }
}

pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// First index of the largest value.
pub fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Bounds, symmetry and positive-scale invariance over `pairs` random pairs
/// of mixed dimension and magnitude.
pub fn cosine_fuzz(pairs: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for k in 0..pairs {
        let dim = rng.random_range(1..=12);
        let sa = 10f64.powi(rng.random_range(-6..=6));
        let sb = 10f64.powi(rng.random_range(-6..=6));
        let a = nonzero(dim, &mut rng).scaled(sa);
        let b = nonzero(dim, &mut rng).scaled(sb);
        let c = cosine_similarity(&a, &b).map_err(|e| format!("pair {k}: {e}"))?;
        if !(-1.0..=1.0).contains(&c) {
            return Err(format!("pair {k}: cosine {c} out of bounds"));
        }
        let back = cosine_similarity(&b, &a).map_err(|e| e.to_string())?;
        if back != c {
            return Err(format!("pair {k}: asymmetric {c} vs {back}"));
        }
        let s = rng.random_range(1e-3..1e3);
        let scaled = cosine_similarity(&a.scaled(s), &b).map_err(|e| e.to_string())?;
        if (scaled - c).abs() > 1e-12 {
            return Err(format!("pair {k}: scaling by {s} moved cosine from {c} to {scaled}"));
        }
    }
    Ok(())
}

/// Presents one input per training call and checks that exactly the winner's
/// error grows, by `1 - c` in `[0, 2]`.
pub fn error_increment(rounds: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let cfg = GsomConfig {
        iterations: 1,
        growth_threshold: f64::INFINITY,
        ..GsomConfig::default()
    };
    let dim = 6;
    let mut map = SomMap::random(3, 3, dim, &mut rng).map_err(|e| e.to_string())?;
    for round in 0..rounds {
        let x = if round % 7 == 0 {
            // Inputs equal to a node and opposite to one hit both ends.
            let w = WeightVector::from_vec(map.node_weights(round % map.len()).to_vec());
            if round % 2 == 0 { w } else { w.scaled(-1.0) }
        } else {
            nonzero(dim, &mut rng)
        };
        let sims: Vec<f64> = (0..map.len())
            .map(|i| naive_cosine(map.node_weights(i), x.as_slice()))
            .collect();
        let best = sims[first_argmax(&sims)];
        let before = map.errors().to_vec();
        map.train(std::slice::from_ref(&x), &cfg, &mut rng).map_err(|e| e.to_string())?;
        let changed: Vec<usize> = (0..map.len()).filter(|&i| map.errors()[i] != before[i]).collect();
        // A perfect match adds nothing, so no node may change at all.
        if changed.len() > 1 {
            return Err(format!("round {round}: nodes {changed:?} all changed"));
        }
        if let Some(&i) = changed.first() {
            // Cosines equal up to rounding may pick either node.
            if best - sims[i] > 1e-12 {
                return Err(format!("round {round}: node {i} won with {} below {best}", sims[i]));
            }
            let inc = map.errors()[i] - before[i];
            if !(-1e-12..=2.0 + 1e-12).contains(&inc) || (inc - (1.0 - sims[i])).abs() > 1e-9 {
                return Err(format!("round {round}: winner {i} grew by {inc}, expected {}", 1.0 - sims[i]));
            }
        } else if 1.0 - best > 1e-12 {
            return Err(format!("round {round}: no node error changed"));
        }
        if map.errors().iter().any(|&e| e < 0.0) {
            return Err(format!("round {round}: negative node error"));
        }
    }
    Ok(())
}

/// Replays a training run from its error history and checks that growth
/// happened exactly where the threshold rule says, that the node count
/// never shrank and that the grid stayed rectangular.
pub fn growth_trigger(seed: u64, window: GrowthWindow, g_t: f64, iterations: usize) -> Check {
    let mut rng = rng(seed);
    let dim = 5;
    let cfg = GsomConfig {
        growth_threshold: g_t,
        growth_window: window,
        iterations,
        ..GsomConfig::default()
    };
    let mut map = SomMap::random(2, 2, dim, &mut rng).map_err(|e| e.to_string())?;
    let inputs: Vec<WeightVector> = (0..6).map(|_| nonzero(dim, &mut rng)).collect();
    // Warm-up so the map starts with non-zero errors.
    map.train(&inputs, &GsomConfig { iterations: 20, ..cfg.clone() }, &mut rng)
        .map_err(|e| e.to_string())?;
    let (mut rows, mut cols) = (map.rows(), map.cols());
    let mut reference = map.errors().iter().sum::<f64>();
    let history_start = map.error_history().len();
    let report = map.train(&inputs, &cfg, &mut rng).map_err(|e| e.to_string())?;
    let history = &map.error_history()[history_start..];
    if history.len() != iterations {
        return Err(format!("history has {} entries for {iterations} iterations", history.len()));
    }
    let mut events = report.growth_events.iter().peekable();
    for (k, &total) in history.iter().enumerate() {
        let i = k + 1;
        let n = (rows * cols) as f64;
        let rise = (total - reference) / n;
        let grew = events.peek().is_some_and(|e| e.0 == i);
        // Comparisons within rounding distance of the threshold are not judged.
        let clear = (rise - g_t).abs() > 1e-9;
        if clear && grew != (rise > g_t) {
            return Err(format!("iteration {i}: rise {rise} vs threshold {g_t}, grew = {grew}"));
        }
        if grew {
            let (_, side) = events.next().unwrap();
            match side {
                Side::Top | Side::Bottom => rows += 1,
                Side::Left | Side::Right => cols += 1,
            }
            // New nodes start at the mean error, so the total scales with N.
            reference = total * (rows * cols) as f64 / n;
        } else if window == GrowthWindow::Iteration {
            reference = total;
        }
    }
    if events.next().is_some() {
        return Err("growth events after the last iteration".into());
    }
    if (map.rows(), map.cols()) != (rows, cols) {
        return Err(format!("grid {}x{} differs from replay {rows}x{cols}", map.rows(), map.cols()));
    }
    rectangular(&map)
}

pub fn rectangular(map: &SomMap) -> Check {
    let n = map.rows() * map.cols();
    if map.len() != n || map.errors().len() != n || map.node_vectors().len() != n {
        return Err(format!("{}x{} grid holds {} nodes", map.rows(), map.cols(), map.len()));
    }
    for i in 0..n {
        let (r, c) = map.grid_position(i);
        if r * map.cols() + c != i {
            return Err(format!("node {i} at ({r}, {c})"));
        }
        if map.node_weights(i).len() != map.dim() {
            return Err(format!("node {i} has wrong length"));
        }
    }
    Ok(())
}

/// Grows along random sides and checks the grid shape, the placement of the
/// old nodes and the neighbour-mean rule for the new ones.
pub fn growth_keeps_grid(seed: u64, steps: usize) -> Check {
    let mut rng = rng(seed);
    let dim = 3;
    let mut map = SomMap::random(2, 2, dim, &mut rng).map_err(|e| e.to_string())?;
    for step in 0..steps {
        let side = [Side::Top, Side::Bottom, Side::Left, Side::Right][rng.random_range(0..4)];
        let old = map.clone();
        map.grow_at(side);
        rectangular(&map)?;
        let (dr, dc) = match side {
            Side::Top => (1, 0),
            Side::Left => (0, 1),
            _ => (0, 0),
        };
        let expected = match side {
            Side::Top | Side::Bottom => (old.rows() + 1, old.cols()),
            Side::Left | Side::Right => (old.rows(), old.cols() + 1),
        };
        if (map.rows(), map.cols()) != expected {
            return Err(format!("step {step}: {side:?} gave {}x{}", map.rows(), map.cols()));
        }
        for r in 0..map.rows() {
            for c in 0..map.cols() {
                let node = map.node_weights(r * map.cols() + c);
                let inside = r >= dr && c >= dc && r - dr < old.rows() && c - dc < old.cols();
                let want: Vec<f64> = if inside {
                    old.node_weights((r - dr) * old.cols() + (c - dc)).to_vec()
                } else {
                    let mut sum = vec![0.0; dim];
                    let mut count = 0.0;
                    for nr in r.saturating_sub(1)..=r + 1 {
                        for nc in c.saturating_sub(1)..=c + 1 {
                            let (Some(or), Some(oc)) = (nr.checked_sub(dr), nc.checked_sub(dc)) else {
                                continue;
                            };
                            if or < old.rows() && oc < old.cols() {
                                for (s, w) in sum.iter_mut().zip(old.node_weights(or * old.cols() + oc)) {
                                    *s += w;
                                }
                                count += 1.0;
                            }
                        }
                    }
                    sum.into_iter().map(|s| s / count).collect()
                };
                if node.iter().zip(&want).any(|(a, b)| (a - b).abs() > 1e-12) {
                    return Err(format!("step {step}: node ({r}, {c}) is {node:?}, expected {want:?}"));
                }
            }
        }
    }
    Ok(())
}

/// Two tight clusters with non-positive inter-cluster cosine: same-cluster
/// winners must lie closer on the grid than cross-cluster winners.
pub fn topographic_separation(seed: u64) -> Check {
    let mut rng = rng(seed);
    let dim = 20;
    let u = gaussian(dim, &mut rng);
    let mut v = gaussian(dim, &mut rng);
    // Make v orthogonal to u, then tilt it away.
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let uv: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    for (vi, ui) in v.iter_mut().zip(&u) {
        *vi -= (uv / uu) * ui + 0.2 * ui;
    }
    let member = |centre: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        let norm: f64 = centre.iter().map(|x| x * x).sum::<f64>().sqrt();
        centre.iter().map(|&c| c + 0.01 * norm * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let a: Vec<Vec<f64>> = (0..10).map(|_| member(&u, &mut rng)).collect();
    let b: Vec<Vec<f64>> = (0..10).map(|_| member(&v, &mut rng)).collect();
    for x in &a {
        for y in &b {
            if naive_cosine(x, y) > 0.0 {
                return Err("clusters overlap".into());
            }
        }
    }
    for group in [&a, &b] {
        for x in group.iter() {
            for y in group.iter() {
                if naive_cosine(x, y) < 0.99 {
                    return Err("cluster not tight".into());
                }
            }
        }
    }
    let inputs: Vec<WeightVector> = a.iter().chain(&b).cloned().map(WeightVector::from_vec).collect();
    let cfg = GsomConfig {
        growth_threshold: f64::INFINITY,
        ..GsomConfig::default()
    };
    let mut map = SomMap::random(6, 6, dim, &mut rng).map_err(|e| e.to_string())?;
    map.train(&inputs, &cfg, &mut rng).map_err(|e| e.to_string())?;
    let winners: Vec<usize> = inputs.iter().map(|x| map.find_winner(x).unwrap()).collect();
    let (mut same, mut n_same, mut cross, mut n_cross) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..inputs.len() {
        for j in (i + 1)..inputs.len() {
            let d = map.grid_distance(winners[i], winners[j]);
            if (i < 10) == (j < 10) {
                same += d;
                n_same += 1.0;
            } else {
                cross += d;
                n_cross += 1.0;
            }
        }
    }
    let (same, cross) = (same / n_same, cross / n_cross);
    if same < cross {
        Ok(())
    } else {
        Err(format!("mean winner distance within clusters {same:.3}, across {cross:.3}"))
    }
}

/// Target and source whose greedy actions differ on `f`.
pub fn disagreeing_pair() -> (WeightVector, WeightVector, FeatureVector) {
    let n = 3;
    let f = FeatureVector::unit(n, 1);
    let mut target = vec![0.0; n * Action::COUNT];
    let mut source = vec![0.0; n * Action::COUNT];
    target[Action::Forward.index() * n + 1] = 1.0;
    source[Action::Left.index() * n + 1] = 1.0;
    (WeightVector::from_vec(target), WeightVector::from_vec(source), f)
}

/// Frequency of source advice over `draws` decisions, for both the free
/// function and the advisor.
pub fn epsilon_mixing(draws: usize, epsilon: f64, seed: u64) -> Result<(f64, f64), String> {
    let (target, source, f) = disagreeing_pair();
    let mut rng = rng(seed);
    let mut hits = 0usize;
    for _ in 0..draws {
        match som_guided_action(&target, &source, &f, epsilon, &mut rng).map_err(|e| e.to_string())? {
            Action::Left => hits += 1,
            Action::Forward => {}
            other => return Err(format!("unexpected action {other:?}")),
        }
    }
    let map = SomMap::from_nodes(1, 1, vec![source.clone()]).map_err(|e| e.to_string())?;
    let mut advisor = Advisor::new(TransferPolicyConfig {
        epsilon,
        advice_refresh_interval: 1,
    })
    .map_err(|e| e.to_string())?;
    advisor.begin_episode(&map, &target, &mut rng).map_err(|e| e.to_string())?;
    let mut advised = 0usize;
    for _ in 0..draws {
        if advisor.act_with_greedy(Action::Forward, &f, &mut rng).map_err(|e| e.to_string())? == Action::Left {
            advised += 1;
        }
    }
    Ok((hits as f64 / draws as f64, advised as f64 / draws as f64))
}

/// A short curriculum: every task, a few episodes, one run per strategy.
pub fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.curriculum.episodes_per_task = 4;
    cfg.curriculum.runs = 1;
    cfg.curriculum.max_steps = 150;
    cfg.evaluation.n_starts = 5;
    cfg.evaluation.horizon = 20;
    cfg.gsom.iterations = 200;
    cfg
}

/// Runs the same configuration twice into separate directories and compares
/// every CSV byte for byte.
pub fn deterministic_outputs(cfg: &ExperimentConfig, a: &Path, b: &Path) -> Check {
    for dir in [a, b] {
        let runs = run_experiment(cfg, &Strategy::ALL).map_err(|e| e.to_string())?;
        output::write_curriculum_outputs(&runs, Some(&cfg.gsom), dir, cfg.output.smoothing_window)
            .map_err(|e| e.to_string())?;
    }
    let mut compared = 0;
    let mut names: Vec<_> = fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in names {
        if !name.to_string_lossy().ends_with(".csv") {
            continue;
        }
        let x = fs::read(a.join(&name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join(&name)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{} differs between identical runs", name.to_string_lossy()));
        }
        compared += 1;
    }
    if compared < 4 {
        return Err(format!("only {compared} CSV files written"));
    }
    Ok(())
}

/// Saves a trained map and checks that weights and errors reload bit for bit.
pub fn map_round_trip(dir: &Path, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut map = SomMap::random(2, 3, 17, &mut rng).map_err(|e| e.to_string())?;
    let inputs: Vec<WeightVector> = (0..4).map(|_| nonzero(17, &mut rng)).collect();
    let cfg = GsomConfig {
        iterations: 300,
        ..GsomConfig::default()
    };
    map.train(&inputs, &cfg, &mut rng).map_err(|e| e.to_string())?;
    let path = dir.join("map.json");
    map.save(Some(&cfg), &path).map_err(|e| e.to_string())?;
    let (loaded, echo) = SomMap::load(&path).map_err(|e| e.to_string())?;
    if echo.as_ref() != Some(&cfg) {
        return Err("configuration echo changed".into());
    }
    if (loaded.rows(), loaded.cols(), loaded.dim()) != (map.rows(), map.cols(), map.dim()) {
        return Err("shape changed".into());
    }
    for i in 0..map.len() {
        let same = map
            .node_weights(i)
            .iter()
            .zip(loaded.node_weights(i))
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            return Err(format!("node {i} weights changed"));
        }
    }
    if map.errors().iter().zip(loaded.errors()).any(|(a, b)| a.to_bits() != b.to_bits()) {
        return Err("errors changed".into());
    }
    Ok(())
}

/// Two states, two actions, deterministic:
/// s0: stay (r = 0.5) or advance to s1 (r = 0);
/// s1: back to s0 (r = 0) or exit (r = 10, terminal).
pub struct Chain;

impl Chain {
    pub const GAMMA: f64 = 0.9;

    pub fn step(s: usize, a: usize) -> (f64, Option<usize>) {
        match (s, a) {
            (0, 0) => (0.5, Some(0)),
            (0, 1) => (0.0, Some(1)),
            (1, 0) => (0.0, Some(0)),
            (1, 1) => (10.0, None),
            _ => unreachable!(),
        }
    }

    /// Optimal action values by value iteration.
    pub fn q_star() -> [[f64; 2]; 2] {
        let mut q = [[0.0f64; 2]; 2];
        for _ in 0..2000 {
            let mut next = q;
            for s in 0..2 {
                for a in 0..2 {
                    let (r, s2) = Self::step(s, a);
                    next[s][a] = r + s2.map_or(0.0, |t| Self::GAMMA * q[t][0].max(q[t][1]));
                }
            }
            q = next;
        }
        q
    }

    /// Discounted return of a deterministic policy from `s`, by rollout.
    pub fn policy_value(policy: [usize; 2], s: usize) -> f64 {
        let (mut state, mut ret, mut discount) = (Some(s), 0.0, 1.0);
        for _ in 0..2000 {
            let Some(cur) = state else { break };
            let (r, next) = Self::step(cur, policy[cur]);
            ret += discount * r;
            discount *= Self::GAMMA;
            state = next;
        }
        ret
    }
}

/// Trains Q(lambda) on the chain with one-hot features and compares the
/// greedy policy with brute force over all deterministic policies, and the
/// learned values with value iteration.
pub fn chain_policy(episodes: usize, seed: u64) -> Check {
    let cfg = QLambdaConfig {
        alpha: 0.3,
        gamma: Chain::GAMMA,
        lambda: 0.9,
        epsilon: 0.3,
    };
    let feats = [FeatureVector::unit(2, 0), FeatureVector::unit(2, 1)];
    let mut w = WeightVector::zeros(4);
    let mut traces = Traces::zeros(4);
    let mut rng = rng(seed);
    let err = |e: somrl::Error| e.to_string();
    for _ in 0..episodes {
        traces.reset();
        let mut s = 0;
        for _ in 0..200 {
            let greedy = qlearn::greedy_index(&w, &feats[s]).map_err(err)?;
            let a = if rng.random::<f64>() < cfg.epsilon { rng.random_range(0..2) } else { greedy };
            let (reward, next) = Chain::step(s, a);
            let outcome = Outcome {
                reward,
                terminal: next.is_none(),
            };
            let f_next = &feats[next.unwrap_or(s)];
            q_lambda_step(&mut w, &mut traces, &feats[s], a, outcome, f_next, a == greedy, &cfg).map_err(err)?;
            match next {
                Some(t) => s = t,
                None => break,
            }
        }
    }

    let best = [[0, 0], [0, 1], [1, 0], [1, 1]]
        .into_iter()
        .max_by(|a, b| Chain::policy_value(*a, 0).total_cmp(&Chain::policy_value(*b, 0)))
        .unwrap();
    let learned = [
        qlearn::greedy_index(&w, &feats[0]).map_err(err)?,
        qlearn::greedy_index(&w, &feats[1]).map_err(err)?,
    ];
    if learned != best {
        return Err(format!("learned policy {learned:?}, optimum {best:?}"));
    }
    let q_star = Chain::q_star();
    for s in 0..2 {
        let v = Chain::policy_value(learned, s);
        let v_star = q_star[s][0].max(q_star[s][1]);
        if (v - v_star).abs() > 1e-2 {
            return Err(format!("state {s}: policy value {v}, optimum {v_star}"));
        }
        for a in 0..2 {
            let q = qlearn::q_value(&w, &feats[s], a).map_err(err)?;
            if (q - q_star[s][a]).abs() > 1e-2 {
                return Err(format!("Q({s}, {a}) = {q}, optimum {}", q_star[s][a]));
            }
        }
    }
    Ok(())
}

fn random_map_and_vector(rng: &mut ChaCha8Rng) -> Result<(SomMap, WeightVector, Vec<f64>), String> {
    let (rows, cols, dim) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..40));
    let map = SomMap::random(rows, cols, dim, rng).map_err(|e| e.to_string())?;
    let x = nonzero(dim, rng);
    let sims = (0..map.len())
        .map(|i| naive_cosine(map.node_weights(i), x.as_slice()))
        .collect();
    Ok((map, x, sims))
}

pub fn winner_scan(cases: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for case in 0..cases {
        let (map, x, sims) = random_map_and_vector(&mut rng)?;
        let got = map.find_winner(&x).map_err(|e| e.to_string())?;
        if got != first_argmax(&sims) {
            return Err(format!("case {case}: winner {got}, scan {}", first_argmax(&sims)));
        }
    }
    Ok(())
}

pub fn source_scan(cases: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    for case in 0..cases {
        let (map, w, sims) = random_map_and_vector(&mut rng)?;
        let best = first_argmax(&sims);
        let sel = select_source(&map, &w).map_err(|e| e.to_string())?;
        if sel.node != best
            || (sel.similarity - sims[best]).abs() >= 1e-12
            || sel.weights.as_slice() != map.node_weights(best)
        {
            return Err(format!("case {case}: selected node {}, scan {best}", sel.node));
        }
    }
    Ok(())
}
