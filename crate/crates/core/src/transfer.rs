//! Exploration guided by the knowledge base.
//!
//! While a target task is learned, the map node most cosine-similar to the
//! current target weights acts as a source task. With probability `ε` the
//! agent follows the source's greedy action, otherwise the target's. Source
//! weights never modify the target weights directly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::gsom::SomMap;
use crate::qlearn::{self, WeightVector};

/// Below this norm the target weights carry no usable direction.
pub const MIN_TARGET_NORM: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferPolicyConfig {
    /// Probability of following the source's advice.
    pub epsilon: f64,
    /// Episodes between source re-selections.
    pub advice_refresh_interval: usize,
}

impl Default for TransferPolicyConfig {
    fn default() -> Self {
        TransferPolicyConfig {
            epsilon: 0.3,
            advice_refresh_interval: 1,
        }
    }
}

impl TransferPolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::config("transfer.epsilon must lie in [0, 1]"));
        }
        if self.advice_refresh_interval == 0 {
            return Err(Error::config("transfer.advice_refresh_interval must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceSelection {
    pub node: usize,
    pub weights: WeightVector,
    pub similarity: f64,
}

/// The node most similar to `w_target`; ties go to the lowest index.
pub fn select_source(map: &SomMap, w_target: &WeightVector) -> Result<SourceSelection> {
    if map.is_empty() {
        return Err(Error::contract("empty map"));
    }
    let (node, similarity) = map.best_match(w_target.as_slice())?;
    Ok(SourceSelection {
        node,
        weights: WeightVector::from_vec(map.node_weights(node).to_vec()),
        similarity,
    })
}

/// Source-greedy with probability `epsilon`, target-greedy otherwise.
pub fn som_guided_action<R: Rng + ?Sized>(
    w_target: &WeightVector,
    w_source: &WeightVector,
    f: &FeatureVector,
    epsilon: f64,
    rng: &mut R,
) -> Result<Action> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::contract("epsilon must lie in [0, 1]"));
    }
    if w_source.len() != w_target.len() {
        return Err(Error::contract("source and target weights differ in length"));
    }
    if follows_source(epsilon, rng) {
        qlearn::greedy_action(w_source, f)
    } else {
        qlearn::greedy_action(w_target, f)
    }
}

// Boundary values consume no randomness.
fn follows_source<R: Rng + ?Sized>(epsilon: f64, rng: &mut R) -> bool {
    if epsilon <= 0.0 {
        false
    } else if epsilon >= 1.0 {
        true
    } else {
        rng.random::<f64>() < epsilon
    }
}

/// Best-node similarity for each target snapshot, in order.
pub fn similarity_trace(snapshots: &[WeightVector], map: &SomMap) -> Result<Vec<f64>> {
    snapshots
        .iter()
        .map(|w| map.best_match(w.as_slice()).map(|(_, s)| s))
        .collect()
}

/// Holds the current source for one target task and refreshes it on
/// schedule.
#[derive(Clone, Debug)]
pub struct Advisor {
    cfg: TransferPolicyConfig,
    source: Option<SourceSelection>,
    episodes_since_refresh: usize,
}

impl Advisor {
    pub fn new(cfg: TransferPolicyConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Advisor {
            cfg,
            source: None,
            episodes_since_refresh: 0,
        })
    }

    pub fn config(&self) -> &TransferPolicyConfig {
        &self.cfg
    }

    pub fn source(&self) -> Option<&SourceSelection> {
        self.source.as_ref()
    }

    /// Call at every episode start. Re-selects the source when due. While
    /// the target weights are still (nearly) zero a uniformly random node is
    /// used instead, since similarity is undefined.
    pub fn begin_episode<R: Rng + ?Sized>(
        &mut self,
        map: &SomMap,
        w_target: &WeightVector,
        rng: &mut R,
    ) -> Result<&SourceSelection> {
        let due = self.source.is_none() || self.episodes_since_refresh >= self.cfg.advice_refresh_interval;
        if due {
            self.source = Some(if w_target.norm() > MIN_TARGET_NORM {
                select_source(map, w_target)?
            } else {
                let node = rng.random_range(0..map.len());
                SourceSelection {
                    node,
                    weights: WeightVector::from_vec(map.node_weights(node).to_vec()),
                    similarity: f64::NAN,
                }
            });
            self.episodes_since_refresh = 0;
        }
        self.episodes_since_refresh += 1;
        Ok(self.source.as_ref().expect("source selected above"))
    }

    pub fn act<R: Rng + ?Sized>(&self, w_target: &WeightVector, f: &FeatureVector, rng: &mut R) -> Result<Action> {
        let source = self
            .source
            .as_ref()
            .ok_or_else(|| Error::contract("advisor used before begin_episode"))?;
        som_guided_action(w_target, &source.weights, f, self.cfg.epsilon, rng)
    }

    /// Same as [`Advisor::act`] when the target's greedy action is already
    /// known.
    pub fn act_with_greedy<R: Rng + ?Sized>(
        &self,
        target_greedy: Action,
        f: &FeatureVector,
        rng: &mut R,
    ) -> Result<Action> {
        let source = self
            .source
            .as_ref()
            .ok_or_else(|| Error::contract("advisor used before begin_episode"))?;
        if follows_source(self.cfg.epsilon, rng) {
            qlearn::greedy_action(&source.weights, f)
        } else {
            Ok(target_greedy)
        }
    }
}
