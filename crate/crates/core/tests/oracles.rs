mod common;

use rand::Rng;

use somrl::env::{self, Action, Position};
use somrl::features::{FeatureVector, Featurizer};
use somrl::harness::config::ExperimentConfig;
use somrl::harness::curriculum::epsilon_greedy;
use somrl::qlearn::{self, run_episode, QLambda};
use somrl::WeightVector;

use common::*;

#[test]
fn q_lambda_recovers_the_optimal_chain_policy() {
    chain_policy(5000, 100).unwrap();
}

#[test]
fn find_winner_matches_exhaustive_scan() {
    winner_scan(1000, 101).unwrap();
}

#[test]
fn select_source_matches_exhaustive_scan() {
    source_scan(1000, 102).unwrap();
}

#[test]
fn greedy_action_matches_nine_way_scan() {
    let mut rng = rng(103);
    for case in 0..1000 {
        let n = rng.random_range(1..30);
        let dense: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() })
            .collect();
        let f = FeatureVector::from_dense(dense.clone());
        let w = nonzero(n * Action::COUNT, &mut rng);
        let q: Vec<f64> = (0..Action::COUNT)
            .map(|a| w.block(a, n).iter().zip(&dense).map(|(x, y)| x * y).sum())
            .collect();
        let expected = first_argmax(&q);
        assert_eq!(qlearn::greedy_index(&w, &f).unwrap(), expected, "case {case}");
        for (a, &qa) in q.iter().enumerate() {
            assert!((qlearn::q_value(&w, &f, a).unwrap() - qa).abs() < 1e-12);
        }
    }
}

/// Rollout written against the dense feature values and the raw geometry.
fn oracle_rollout(
    w: &WeightVector,
    task: &env::TaskSpec,
    fz: &Featurizer,
    start: Position,
    horizon: usize,
) -> f64 {
    let arena = fz.arena();
    let n = fz.len();
    let mut p = start;
    let mut ret = 0.0;
    for _ in 0..horizon {
        let dense = fz.encode(&p).unwrap().values().to_vec();
        let q: Vec<f64> = (0..Action::COUNT)
            .map(|a| w.block(a, n).iter().zip(&dense).map(|(x, y)| x * y).sum())
            .collect();
        let t = env::step(p, Action::ALL[first_argmax(&q)], task, arena).unwrap();
        ret += t.reward;
        if t.terminal {
            break;
        }
        p = t.next;
    }
    ret
}

#[test]
fn evaluation_matches_independent_rollout() {
    let cfg = ExperimentConfig::default();
    let fz = Featurizer::new(&cfg.arena, &cfg.rbf).unwrap();
    let task = &cfg.tasks[0];
    let mut rng = rng(104);
    let mut learner = QLambda::new(cfg.qlearn.clone(), fz.len() * Action::COUNT).unwrap();
    for _ in 0..100 {
        let start = env::sample_start(&cfg.arena, task, &mut rng).unwrap();
        run_episode(&mut learner, task, &fz, start, 2000, &mut rng, |w, f, _, r| {
            epsilon_greedy(w, f, cfg.qlearn.epsilon, r)
        })
        .unwrap();
    }
    let starts: Vec<Position> = (0..100)
        .map(|_| env::sample_start(&cfg.arena, task, &mut rng).unwrap())
        .collect();
    let ours = qlearn::evaluate_from(&learner.weights, task, &fz, &starts, 100, 1.0).unwrap();
    let oracle = starts
        .iter()
        .map(|&s| oracle_rollout(&learner.weights, task, &fz, s, 100))
        .sum::<f64>()
        / starts.len() as f64;
    assert_eq!(ours, oracle);
}

#[test]
fn zero_weights_stay_put_for_the_whole_horizon() {
    let cfg = ExperimentConfig::default();
    let fz = Featurizer::new(&cfg.arena, &cfg.rbf).unwrap();
    let w = WeightVector::zeros(fz.len() * Action::COUNT);
    let mut rng = rng(105);
    let task = &cfg.tasks[2];
    let ret = qlearn::evaluate_return(&w, task, &fz, 100, 100, 1.0, &mut rng).unwrap();
    assert_eq!(ret, 100.0 * task.living_penalty);
}
