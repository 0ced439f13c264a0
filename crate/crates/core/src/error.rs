use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge ({tail}, {head}) out of range for {n} nodes")]
    NodeOutOfRange {
        tail: NodeId,
        head: NodeId,
        n: usize,
    },
    #[error("edge ({0}, {1}) has invalid weight {2}")]
    InvalidWeight(NodeId, NodeId, f64),
    #[error("activation probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("incubation parameter {0} must be positive and finite")]
    InvalidTheta(f64),
    #[error("edge parameters are not set; call with_default_params first")]
    ParamsUnset,
    #[error("seed set is empty")]
    EmptySeeds,
    #[error("seed node {0} listed twice")]
    DuplicateSeed(NodeId),
    #[error("seed node {node} out of range for {n} nodes")]
    SeedOutOfRange { node: NodeId, n: usize },
    #[error("label {label} outside 1..={num_labels}")]
    LabelOutOfRange { label: u32, num_labels: usize },
    #[error("prior {value} for node {node} label {label} outside [0, 1]")]
    InvalidPrior { node: NodeId, label: u32, value: f64 },
    #[error("incoming weight of node {node} sums to {sum} > 1")]
    IncomingWeightTooLarge { node: NodeId, sum: f64 },
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("{name} must lie in (0, 1], got {value}")]
    InvalidTolerance { name: &'static str, value: f64 },
    #[error("{uncertain} uncertain edges exceed the enumeration limit of {limit}")]
    TooManyEdges { uncertain: usize, limit: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("replay table has {got} entries, expected {expected}")]
    ReplayShape { got: usize, expected: usize },
    #[error("delay {0} is not valid for this model")]
    InvalidDelay(f64),
    #[error("budget k={k} exceeds {n} nodes")]
    BudgetTooLarge { k: usize, n: usize },
    #[error("evaluation set is empty")]
    EmptyEvaluation,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
