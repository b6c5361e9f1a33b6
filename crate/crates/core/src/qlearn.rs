//! Linear action-value functions trained with Watkins's Q(λ).
//!
//! Weights are stored as one contiguous block per action, each block as long
//! as the feature vector. The number of actions is therefore
//! `weights.len() / features.len()`; navigation uses nine.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{self, Action, Position, TaskSpec};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Featurizer};
use crate::vector;

/// Largest weight magnitude tolerated before a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// Parameters of a linear value function, or any vector stored in the map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn zeros(len: usize) -> Self {
        WeightVector(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        WeightVector(values)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        vector::norm(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Weights of action `a` for features of length `n`.
    pub fn block(&self, a: usize, n: usize) -> &[f64] {
        &self.0[a * n..(a + 1) * n]
    }

    pub fn scaled(&self, s: f64) -> WeightVector {
        WeightVector(self.0.iter().map(|v| v * s).collect())
    }
}

impl std::ops::Add for &WeightVector {
    type Output = WeightVector;

    fn add(self, rhs: &WeightVector) -> WeightVector {
        WeightVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QLambdaConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Exploration probability of the behaviour policy.
    pub epsilon: f64,
}

impl Default for QLambdaConfig {
    fn default() -> Self {
        QLambdaConfig {
            alpha: 0.3,
            gamma: 0.9,
            lambda: 0.9,
            epsilon: 0.3,
        }
    }
}

impl QLambdaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("alpha must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config("lambda must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config("epsilon must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn action_count(w: &WeightVector, f: &FeatureVector) -> Result<usize> {
    if f.is_empty() || !w.len().is_multiple_of(f.len()) || w.is_empty() {
        return Err(Error::contract(format!(
            "weight length {} is not a positive multiple of feature length {}",
            w.len(),
            f.len()
        )));
    }
    Ok(w.len() / f.len())
}

/// Inner product of action `a`'s weight block with `f`.
pub fn q_value(w: &WeightVector, f: &FeatureVector, a: usize) -> Result<f64> {
    let n_actions = action_count(w, f)?;
    if a >= n_actions {
        return Err(Error::contract(format!("action {a} out of range ({n_actions} actions)")));
    }
    Ok(f.dot(w.block(a, f.len())))
}

fn q_unchecked(w: &WeightVector, f: &FeatureVector, a: usize) -> f64 {
    f.dot(w.block(a, f.len()))
}

/// Action values for every action.
pub fn q_values(w: &WeightVector, f: &FeatureVector) -> Result<Vec<f64>> {
    let n_actions = action_count(w, f)?;
    Ok((0..n_actions).map(|a| q_unchecked(w, f, a)).collect())
}

/// Argmax over actions; ties go to the lowest index.
pub fn greedy_index(w: &WeightVector, f: &FeatureVector) -> Result<usize> {
    let n_actions = action_count(w, f)?;
    Ok(argmax_unchecked(w, f, n_actions).0)
}

fn argmax_unchecked(w: &WeightVector, f: &FeatureVector, n_actions: usize) -> (usize, f64) {
    let mut best = (0, q_unchecked(w, f, 0));
    for a in 1..n_actions {
        let q = q_unchecked(w, f, a);
        if q > best.1 {
            best = (a, q);
        }
    }
    best
}

/// Greedy navigation action.
pub fn greedy_action(w: &WeightVector, f: &FeatureVector) -> Result<Action> {
    let i = greedy_index(w, f)?;
    Action::from_index(i).ok_or_else(|| Error::contract("weight vector does not have nine action blocks"))
}

/// Eligibility traces, shaped like the weight vector.
///
/// Only entries set since the last reset can be non-zero; they are tracked
/// so decay and weight updates skip the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct Traces {
    values: Vec<f64>,
    touched: Vec<u32>,
    marked: Vec<bool>,
}

impl Traces {
    pub fn zeros(len: usize) -> Self {
        Traces {
            values: vec![0.0; len],
            touched: Vec::new(),
            marked: vec![false; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn reset(&mut self) {
        for &i in &self.touched {
            self.values[i as usize] = 0.0;
            self.marked[i as usize] = false;
        }
        self.touched.clear();
    }

    fn decay(&mut self, factor: f64) {
        for &i in &self.touched {
            self.values[i as usize] *= factor;
        }
    }

    // Replacing trace: e ← max(e, v).
    fn replace(&mut self, i: usize, v: f64) {
        if !self.marked[i] {
            self.marked[i] = true;
            self.touched.push(i as u32);
        }
        let e = &mut self.values[i];
        *e = e.max(v);
    }
}

/// Reward and termination of one transition, decoupled from the arena so
/// the update also serves small test MDPs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub reward: f64,
    pub terminal: bool,
}

impl From<&env::Transition> for Outcome {
    fn from(t: &env::Transition) -> Self {
        Outcome {
            reward: t.reward,
            terminal: t.terminal,
        }
    }
}

/// One Watkins Q(λ) update with replacing traces; returns the TD error.
///
/// `was_greedy` says whether `a` was the greedy action when it was chosen.
/// After an exploratory action the earlier history no longer follows the
/// greedy policy, so the traces are cut before the taken action's trace is
/// set; otherwise they decay by `γλ`.
#[allow(clippy::too_many_arguments)]
pub fn q_lambda_step(
    w: &mut WeightVector,
    traces: &mut Traces,
    f: &FeatureVector,
    a: usize,
    outcome: Outcome,
    f_next: &FeatureVector,
    was_greedy: bool,
    cfg: &QLambdaConfig,
) -> Result<f64> {
    let n_actions = action_count(w, f)?;
    if f_next.len() != f.len() || traces.len() != w.len() || a >= n_actions {
        return Err(Error::contract("shape mismatch in Q(λ) update"));
    }
    let n = f.len();
    let q_sa = q_unchecked(w, f, a);
    let target = if outcome.terminal {
        outcome.reward
    } else {
        outcome.reward + cfg.gamma * argmax_unchecked(w, f_next, n_actions).1
    };
    let delta = target - q_sa;
    if !delta.is_finite() {
        return Err(Error::Divergence(format!("non-finite TD error {delta}")));
    }

    if was_greedy {
        traces.decay(cfg.gamma * cfg.lambda);
    } else {
        traces.reset();
    }
    let base = a * n;
    for &i in f.active() {
        traces.replace(base + i as usize, f.get(i as usize));
    }

    // Only entries with a trace change, so checking them keeps every weight
    // within the limit.
    let step = cfg.alpha * delta;
    let mut peak = 0.0f64;
    for &i in &traces.touched {
        let wi = &mut w.0[i as usize];
        *wi += step * traces.values[i as usize];
        peak = peak.max(wi.abs());
    }
    if !(peak <= DIVERGENCE_LIMIT) {
        return Err(Error::Divergence(format!("weight magnitude {peak:e} exceeds limit")));
    }
    Ok(delta)
}

/// A Q(λ) learner for one task.
#[derive(Clone, Debug)]
pub struct QLambda {
    pub cfg: QLambdaConfig,
    pub weights: WeightVector,
    traces: Traces,
}

impl QLambda {
    pub fn new(cfg: QLambdaConfig, len: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(QLambda {
            cfg,
            weights: WeightVector::zeros(len),
            traces: Traces::zeros(len),
        })
    }

    pub fn traces(&self) -> &Traces {
        &self.traces
    }

    pub fn begin_episode(&mut self) {
        self.traces.reset();
    }

    pub fn update(
        &mut self,
        f: &FeatureVector,
        a: usize,
        outcome: Outcome,
        f_next: &FeatureVector,
        was_greedy: bool,
    ) -> Result<f64> {
        q_lambda_step(&mut self.weights, &mut self.traces, f, a, outcome, f_next, was_greedy, &self.cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeStats {
    pub steps: usize,
    pub total_reward: f64,
    pub reached_goal: bool,
}

/// Runs one learning episode from `start`. `behaviour` picks the action
/// given the current target weights, the features and the target's greedy
/// action; the update treats the choice as greedy when it coincides with
/// that action.
pub fn run_episode<R, B>(
    learner: &mut QLambda,
    task: &TaskSpec,
    featurizer: &Featurizer,
    start: Position,
    max_steps: usize,
    rng: &mut R,
    mut behaviour: B,
) -> Result<EpisodeStats>
where
    R: Rng + ?Sized,
    B: FnMut(&WeightVector, &FeatureVector, Action, &mut R) -> Result<Action>,
{
    learner.begin_episode();
    let arena = featurizer.arena();
    let mut p = start;
    let mut f = featurizer.encode(&p)?;
    let mut f_next = FeatureVector::zeros(f.len());
    let mut stats = EpisodeStats {
        steps: 0,
        total_reward: 0.0,
        reached_goal: false,
    };
    while stats.steps < max_steps {
        let greedy = greedy_action(&learner.weights, &f)?;
        let a = behaviour(&learner.weights, &f, greedy, rng)?;
        let tr = env::step(p, a, task, arena)?;
        featurizer.encode_into(&tr.next, &mut f_next)?;
        learner.update(&f, a.index(), Outcome::from(&tr), &f_next, a == greedy)?;
        stats.steps += 1;
        stats.total_reward += tr.reward;
        if tr.terminal {
            stats.reached_goal = true;
            break;
        }
        p = tr.next;
        std::mem::swap(&mut f, &mut f_next);
    }
    Ok(stats)
}

/// Return of a greedy rollout: `Σ γ_evalᵗ rₜ` for up to `horizon` steps or
/// until the goal.
pub fn greedy_rollout(
    w: &WeightVector,
    task: &TaskSpec,
    featurizer: &Featurizer,
    start: Position,
    horizon: usize,
    gamma_eval: f64,
    scratch: &mut FeatureVector,
) -> Result<f64> {
    let arena = featurizer.arena();
    let mut p = start;
    let mut ret = 0.0;
    let mut discount = 1.0;
    for _ in 0..horizon {
        featurizer.encode_into(&p, scratch)?;
        let a = greedy_action(w, scratch)?;
        let tr = env::step(p, a, task, arena)?;
        ret += discount * tr.reward;
        discount *= gamma_eval;
        if tr.terminal {
            break;
        }
        p = tr.next;
    }
    Ok(ret)
}

/// Mean greedy-rollout return over the given start positions.
pub fn evaluate_from(
    w: &WeightVector,
    task: &TaskSpec,
    featurizer: &Featurizer,
    starts: &[Position],
    horizon: usize,
    gamma_eval: f64,
) -> Result<f64> {
    if starts.is_empty() || horizon == 0 {
        return Err(Error::contract("evaluation needs at least one start and one step"));
    }
    let mut scratch = FeatureVector::zeros(featurizer.len());
    let mut total = 0.0;
    for &s in starts {
        total += greedy_rollout(w, task, featurizer, s, horizon, gamma_eval, &mut scratch)?;
    }
    Ok(total / starts.len() as f64)
}

/// Mean greedy-rollout return from `n_starts` freshly sampled start positions.
pub fn evaluate_return<R: Rng + ?Sized>(
    w: &WeightVector,
    task: &TaskSpec,
    featurizer: &Featurizer,
    n_starts: usize,
    horizon: usize,
    gamma_eval: f64,
    rng: &mut R,
) -> Result<f64> {
    let starts = (0..n_starts)
        .map(|_| env::sample_start(featurizer.arena(), task, rng))
        .collect::<Result<Vec<_>>>()?;
    evaluate_from(w, task, featurizer, &starts, horizon, gamma_eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> QLambdaConfig {
        QLambdaConfig::default()
    }

    #[test]
    fn zero_weights_give_zero_values_and_action_zero() {
        let w = WeightVector::zeros(9 * 6);
        let f = FeatureVector::from_dense(vec![0.3, 0.0, 1.0, 0.2, 0.0, 0.5]);
        for a in 0..9 {
            assert_eq!(q_value(&w, &f, a).unwrap(), 0.0);
        }
        assert_eq!(greedy_action(&w, &f).unwrap(), Action::Stay);
    }

    #[test]
    fn unit_features_extract_single_weight() {
        let w = WeightVector::from_vec((0..18).map(|i| i as f64).collect());
        let f = FeatureVector::unit(6, 4);
        assert_eq!(q_value(&w, &f, 2).unwrap(), 16.0);
    }

    #[test]
    fn dominant_block_wins() {
        let mut w = WeightVector::zeros(9 * 5);
        w.as_mut_slice()[3 * 5 + 1] = 50.0;
        let f = FeatureVector::from_dense(vec![0.1, 0.9, 0.0, 0.0, 0.2]);
        assert_eq!(greedy_action(&w, &f).unwrap(), Action::Left);
    }

    #[test]
    fn shape_mismatch_is_a_contract_error() {
        let w = WeightVector::zeros(10);
        let f = FeatureVector::zeros(3);
        assert!(matches!(q_value(&w, &f, 0), Err(Error::Contract(_))));
        let w = WeightVector::zeros(9);
        assert!(q_value(&w, &f, 3).is_err());
    }

    #[test]
    fn terminal_update_from_zero() {
        let mut w = WeightVector::zeros(9 * 4);
        let mut e = Traces::zeros(9 * 4);
        let f = FeatureVector::unit(4, 2);
        let out = Outcome {
            reward: 100.0,
            terminal: true,
        };
        let delta = q_lambda_step(&mut w, &mut e, &f, 5, out, &f, true, &cfg()).unwrap();
        assert_eq!(delta, 100.0);
        assert_abs_diff_eq!(w.block(5, 4)[2], 30.0, epsilon = 1e-12);
        // Every other block is untouched.
        for a in (0..9).filter(|&a| a != 5) {
            assert!(w.block(a, 4).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn unrefreshed_traces_decay_by_gamma_lambda() {
        let mut w = WeightVector::zeros(9 * 4);
        let mut e = Traces::zeros(9 * 4);
        let out = Outcome {
            reward: -10.0,
            terminal: false,
        };
        let f0 = FeatureVector::unit(4, 0);
        let f1 = FeatureVector::unit(4, 1);
        q_lambda_step(&mut w, &mut e, &f0, 1, out, &f1, true, &cfg()).unwrap();
        assert_eq!(e.as_slice()[4], 1.0);
        q_lambda_step(&mut w, &mut e, &f1, 1, out, &f0, true, &cfg()).unwrap();
        assert_abs_diff_eq!(e.as_slice()[4], 0.81, epsilon = 1e-12);
        q_lambda_step(&mut w, &mut e, &f1, 1, out, &f0, true, &cfg()).unwrap();
        assert_abs_diff_eq!(e.as_slice()[4], 0.81 * 0.81, epsilon = 1e-12);
    }

    #[test]
    fn exploratory_action_cuts_history() {
        let mut w = WeightVector::zeros(9 * 4);
        let mut e = Traces::zeros(9 * 4);
        let out = Outcome {
            reward: -10.0,
            terminal: false,
        };
        let f0 = FeatureVector::unit(4, 0);
        let f1 = FeatureVector::unit(4, 1);
        q_lambda_step(&mut w, &mut e, &f0, 0, out, &f1, true, &cfg()).unwrap();
        q_lambda_step(&mut w, &mut e, &f1, 3, out, &f0, false, &cfg()).unwrap();
        let nonzero: Vec<usize> = (0..36).filter(|&i| e.as_slice()[i] != 0.0).collect();
        assert_eq!(nonzero, vec![3 * 4 + 1]);
    }

    #[test]
    fn traces_bounded_by_feature_max() {
        let mut w = WeightVector::zeros(9 * 3);
        let mut e = Traces::zeros(9 * 3);
        let f = FeatureVector::from_dense(vec![0.2, 0.7, 0.1]);
        let out = Outcome {
            reward: -1.0,
            terminal: false,
        };
        for k in 0..50 {
            q_lambda_step(&mut w, &mut e, &f, k % 9, out, &f, true, &cfg()).unwrap();
            assert!(e.as_slice().iter().all(|&v| (0.0..=0.7).contains(&v)));
        }
    }

    #[test]
    fn divergence_is_detected() {
        let mut w = WeightVector::from_vec(vec![f64::NAN; 9]);
        let mut e = Traces::zeros(9);
        let f = FeatureVector::unit(1, 0);
        let out = Outcome {
            reward: 0.0,
            terminal: false,
        };
        assert!(matches!(
            q_lambda_step(&mut w, &mut e, &f, 0, out, &f, true, &cfg()),
            Err(Error::Divergence(_))
        ));
        let mut w = WeightVector::from_vec(vec![2e9; 9]);
        assert!(q_lambda_step(&mut w, &mut e, &f, 0, out, &f, true, &cfg()).is_err());
    }

    #[test]
    fn linearity_of_q() {
        let w1 = WeightVector::from_vec((0..27).map(|i| (i as f64).sin()).collect());
        let w2 = WeightVector::from_vec((0..27).map(|i| (i as f64 * 0.3).cos()).collect());
        let f = FeatureVector::from_dense(vec![0.4, 0.0, 1.3]);
        let sum = &w1 + &w2;
        for a in 0..9 {
            let lhs = q_value(&sum, &f, a).unwrap();
            let rhs = q_value(&w1, &f, a).unwrap() + q_value(&w2, &f, a).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }
}
