//! Multi-task reinforcement learning with a growing self-organizing map as
//! the knowledge base.
//!
//! Learned Q(λ) weight vectors are stored in a [`gsom::SomMap`] whose nodes
//! are compared by cosine similarity. While a new task is learned, the node
//! most similar to the current target weights supplies exploratory action
//! advice ([`transfer`]). The [`harness`] module runs the curriculum and
//! scaling experiments and writes their CSV outputs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env;
pub mod error;
pub mod features;
pub mod gsom;
pub mod harness;
pub mod qlearn;
pub mod transfer;
pub mod vector;

pub use error::{Error, Result};
pub use qlearn::WeightVector;
