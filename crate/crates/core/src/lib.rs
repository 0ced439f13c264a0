//! Semi-supervised node labeling by competitive infection dynamics.
//!
//! Seeds start an infection with their own labels; every other node adopts
//! the label that reaches it first. Averaging many random instances gives
//! per-node label probabilities. Each instance is a shortest-path problem
//! over sampled edge delays, solved with one multi-source Dijkstra pass.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod active;
pub mod baselines;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod matrix;
pub mod oracle;
pub mod propagation;

pub use dynamics::{DelayModel, ExpParam, LtGraph, PenaltyLink, PenaltySource, ReplayTable};
pub use error::{Error, Result};
pub use graph::{DirectedGraph, EdgeId, Label, NodeId, PredictionMatrix, PriorMatrix, SeedSet, NULL_LABEL};
pub use matrix::DenseMatrix;
pub use propagation::{
    basic_infprop, hard_labels, infprop, instance_rng, required_samples, run_instance, InstanceOutcome,
};
