//! Immutable weighted directed graphs in compressed out-adjacency form, plus
//! the seed, prior, and prediction containers shared by the rest of the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type EdgeId = usize;

/// Label index. `1..=L` are real labels, [`NULL_LABEL`] is the
/// never-infected state.
pub type Label = u32;

pub const NULL_LABEL: Label = 0;

#[derive(Debug, Clone, PartialEq)]
struct EdgeParams {
    prob: Vec<f64>,
    theta: Vec<f64>,
}

/// Directed graph with per-edge weight, activation probability and
/// incubation parameter. Edges are ordered by `(source, target)`; an
/// [`EdgeId`] is a position in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    offsets: Vec<usize>,
    sources: Vec<u32>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    in_offsets: Vec<usize>,
    in_edges: Vec<EdgeId>,
    params: Option<EdgeParams>,
    symmetrized: bool,
}

impl DirectedGraph {
    /// Validates and builds a directed graph from `(u, v, w)` triples.
    pub fn new(n: usize, edges: &[(NodeId, NodeId, f64)]) -> Result<Self> {
        Self::build(n, edges.to_vec(), false)
    }

    /// Expands each undirected `{u, v}` into the arcs `u→v` and `v→u`.
    pub fn undirected(n: usize, edges: &[(NodeId, NodeId, f64)]) -> Result<Self> {
        let mut arcs = Vec::with_capacity(edges.len() * 2);
        for &(u, v, w) in edges {
            arcs.push((u, v, w));
            arcs.push((v, u, w));
        }
        Self::build(n, arcs, true)
    }

    fn build(n: usize, mut edges: Vec<(NodeId, NodeId, f64)>, symmetrized: bool) -> Result<Self> {
        for &(u, v, w) in &edges {
            if u >= n || v >= n {
                return Err(Error::NodeOutOfRange { tail: u, head: v, n });
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidWeight(u, v, w));
            }
        }
        edges.sort_by_key(|&(u, v, _)| (u, v));
        if let Some(pair) = edges.windows(2).find(|p| p[0].0 == p[1].0 && p[0].1 == p[1].1) {
            return Err(Error::DuplicateEdge(pair[0].0, pair[0].1));
        }

        let m = edges.len();
        let mut offsets = vec![0usize; n + 1];
        for &(u, _, _) in &edges {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let sources = edges.iter().map(|e| e.0 as u32).collect();
        let targets: Vec<u32> = edges.iter().map(|e| e.1 as u32).collect();
        let weights = edges.iter().map(|e| e.2).collect();

        let mut in_offsets = vec![0usize; n + 1];
        for &t in &targets {
            in_offsets[t as usize + 1] += 1;
        }
        for i in 0..n {
            in_offsets[i + 1] += in_offsets[i];
        }
        let mut cursor = in_offsets.clone();
        let mut in_edges = vec![0; m];
        for (e, &t) in targets.iter().enumerate() {
            in_edges[cursor[t as usize]] = e;
            cursor[t as usize] += 1;
        }

        Ok(Self {
            n,
            offsets,
            sources,
            targets,
            weights,
            in_offsets,
            in_edges,
            params: None,
            symmetrized,
        })
    }

    /// Sets `p = p_global` on every edge and `θ_uv = 1 / out_degree(u)`.
    pub fn with_default_params(mut self, p_global: f64) -> Result<Self> {
        check_prob(p_global)?;
        let m = self.num_edges();
        let mut theta = Vec::with_capacity(m);
        for u in 0..self.n {
            let d = self.out_degree(u);
            theta.extend(std::iter::repeat_n(1.0 / d as f64, d));
        }
        self.params = Some(EdgeParams { prob: vec![p_global; m], theta });
        Ok(self)
    }

    /// Explicit per-edge parameters, indexed by [`EdgeId`].
    pub fn with_edge_params(mut self, prob: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let m = self.num_edges();
        if prob.len() != m || theta.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "expected {m} edge parameters, got p={} theta={}",
                prob.len(),
                theta.len()
            )));
        }
        for &p in &prob {
            check_prob(p)?;
        }
        for &t in &theta {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidTheta(t));
            }
        }
        self.params = Some(EdgeParams { prob, theta });
        Ok(self)
    }

    /// Uses each edge weight as its activation probability, with the
    /// default `θ = 1 / d_u`.
    pub fn with_weight_as_prob(self) -> Result<Self> {
        let theta = self.default_theta();
        let prob = self.weights.clone();
        self.with_edge_params(prob, theta)
    }

    fn default_theta(&self) -> Vec<f64> {
        (0..self.num_edges())
            .map(|e| 1.0 / self.out_degree(self.sources[e] as usize) as f64)
            .collect()
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn is_symmetrized(&self) -> bool {
        self.symmetrized
    }

    pub fn has_params(&self) -> bool {
        self.params.is_some()
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    /// Edge ids leaving `u`, in ascending target order.
    pub fn out_edges(&self, u: NodeId) -> std::ops::Range<EdgeId> {
        self.offsets[u]..self.offsets[u + 1]
    }

    /// Edge ids entering `v`.
    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_edges[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    pub fn source(&self, e: EdgeId) -> NodeId {
        self.sources[e] as usize
    }

    pub fn target(&self, e: EdgeId) -> NodeId {
        self.targets[e] as usize
    }

    pub fn weight(&self, e: EdgeId) -> f64 {
        self.weights[e]
    }

    /// Activation probability; panics if parameters were never set.
    pub fn prob(&self, e: EdgeId) -> f64 {
        self.params.as_ref().expect("edge parameters unset").prob[e]
    }

    pub fn theta(&self, e: EdgeId) -> f64 {
        self.params.as_ref().expect("edge parameters unset").theta[e]
    }

    pub fn find_edge(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        let range = self.out_edges(u);
        let start = range.start;
        self.targets[range]
            .binary_search(&(v as u32))
            .ok()
            .map(|i| start + i)
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.num_edges()).map(|e| (self.source(e), self.target(e), self.weights[e]))
    }

    pub(crate) fn require_params(&self) -> Result<()> {
        if self.params.is_some() {
            Ok(())
        } else {
            Err(Error::ParamsUnset)
        }
    }

    /// Checks the structural invariants. Graphs built through the
    /// constructors always pass; this exists for tests and deserialized data.
    pub fn validate(&self) -> Result<()> {
        let m = self.num_edges();
        if self.offsets.len() != self.n + 1 || self.offsets[0] != 0 || self.offsets[self.n] != m {
            return Err(Error::ShapeMismatch("offsets do not cover edges".into()));
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::ShapeMismatch("offsets not monotone".into()));
        }
        for u in 0..self.n {
            let ts = &self.targets[self.out_edges(u)];
            for (i, &t) in ts.iter().enumerate() {
                if t as usize == u {
                    return Err(Error::SelfLoop(u));
                }
                if i > 0 && ts[i - 1] >= t {
                    return Err(Error::DuplicateEdge(u, t as usize));
                }
            }
        }
        if let Some(p) = &self.params {
            for (&pr, &th) in p.prob.iter().zip(&p.theta) {
                check_prob(pr)?;
                if !(th > 0.0) {
                    return Err(Error::InvalidTheta(th));
                }
            }
        }
        Ok(())
    }
}

fn check_prob(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// Labeled seed nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    entries: Vec<(NodeId, Label)>,
    num_labels: usize,
}

impl SeedSet {
    pub fn new(entries: Vec<(NodeId, Label)>, num_labels: usize, n: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptySeeds);
        }
        let mut seen = vec![false; n];
        for &(node, label) in &entries {
            if node >= n {
                return Err(Error::SeedOutOfRange { node, n });
            }
            if seen[node] {
                return Err(Error::DuplicateSeed(node));
            }
            seen[node] = true;
            if label == NULL_LABEL || label as usize > num_labels {
                return Err(Error::LabelOutOfRange { label, num_labels });
            }
        }
        Ok(Self { entries, num_labels })
    }

    pub fn entries(&self) -> &[(NodeId, Label)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    /// Most frequent seed label; ties go to the smaller label.
    pub fn majority_label(&self) -> Label {
        let mut counts = vec![0usize; self.num_labels + 1];
        for &(_, l) in &self.entries {
            counts[l as usize] += 1;
        }
        let mut best = 1;
        for l in 1..=self.num_labels {
            if counts[l] > counts[best] {
                best = l;
            }
        }
        best as Label
    }

    /// Membership mask over `n` nodes.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &(s, _) in &self.entries {
            mask[s] = true;
        }
        mask
    }
}

/// Per-node, per-label priors `ρ` in `[0, 1]`; absent entries are 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorMatrix {
    n: usize,
    num_labels: usize,
    values: Vec<f64>,
}

impl PriorMatrix {
    pub fn ones(n: usize, num_labels: usize) -> Self {
        Self { n, num_labels, values: vec![1.0; n * num_labels] }
    }

    pub fn set(&mut self, node: NodeId, label: Label, value: f64) -> Result<()> {
        if label == NULL_LABEL || label as usize > self.num_labels {
            return Err(Error::LabelOutOfRange { label, num_labels: self.num_labels });
        }
        if node >= self.n {
            return Err(Error::SeedOutOfRange { node, n: self.n });
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidPrior { node, label, value });
        }
        if value == 0.0 {
            log::warn!("prior 0 for node {node} label {label}: label can never reach it");
        }
        self.values[node * self.num_labels + label as usize - 1] = value;
        Ok(())
    }

    pub fn get(&self, node: NodeId, label: Label) -> f64 {
        self.values[node * self.num_labels + label as usize - 1]
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }
}

/// Row-major `n × (L+1)` matrix of per-node label probabilities. Column 0
/// holds the never-infected mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatrix {
    n: usize,
    num_labels: usize,
    values: Vec<f64>,
    /// Number of Monte-Carlo instances behind the estimate, if sampled.
    samples: Option<usize>,
}

impl PredictionMatrix {
    pub fn zeros(n: usize, num_labels: usize) -> Self {
        Self { n, num_labels, values: vec![0.0; n * (num_labels + 1)], samples: None }
    }

    /// Builds `counts / samples` from integer outcome counts.
    pub fn from_counts(n: usize, num_labels: usize, counts: &[u64], samples: usize) -> Self {
        assert_eq!(counts.len(), n * (num_labels + 1));
        let scale = samples as f64;
        Self {
            n,
            num_labels,
            values: counts.iter().map(|&c| c as f64 / scale).collect(),
            samples: Some(samples),
        }
    }

    pub fn from_rows(n: usize, num_labels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * (num_labels + 1) {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {n}×{}",
                values.len(),
                num_labels + 1
            )));
        }
        Ok(Self { n, num_labels, values, samples: None })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn samples(&self) -> Option<usize> {
        self.samples
    }

    pub fn row(&self, v: NodeId) -> &[f64] {
        let w = self.num_labels + 1;
        &self.values[v * w..(v + 1) * w]
    }

    pub fn row_mut(&mut self, v: NodeId) -> &mut [f64] {
        let w = self.num_labels + 1;
        &mut self.values[v * w..(v + 1) * w]
    }

    pub fn get(&self, v: NodeId, label: Label) -> f64 {
        self.values[v * (self.num_labels + 1) + label as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> crate::matrix::DenseMatrix {
        crate::matrix::DenseMatrix::from_vec(self.n, self.num_labels + 1, self.values.clone())
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &PredictionMatrix) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checks row-stochasticity, entry range, seed rows and (when sampled)
    /// that every entry is a multiple of `1/N`.
    pub fn validate(&self, seeds: Option<&SeedSet>) -> Result<()> {
        for v in 0..self.n {
            let row = self.row(v);
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::ShapeMismatch(format!("row {v} sums to {sum}")));
            }
            if let Some(x) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::ShapeMismatch(format!("row {v} has entry {x}")));
            }
            if let Some(n) = self.samples {
                for &x in row {
                    let k = x * n as f64;
                    if (k - k.round()).abs() > 1e-6 {
                        return Err(Error::ShapeMismatch(format!(
                            "row {v} entry {x} is not a multiple of 1/{n}"
                        )));
                    }
                }
            }
        }
        if let Some(seeds) = seeds {
            for &(s, l) in seeds.entries() {
                if self.get(s, l) != 1.0 {
                    return Err(Error::ShapeMismatch(format!("seed row {s} is not one-hot")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let g = DirectedGraph::new(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.out_degree(0), 1);
        assert_eq!(g.out_degree(1), 0);
        assert_eq!(g.in_edges(1), &[0]);
        g.validate().unwrap();
    }

    #[test]
    fn empty_graph() {
        let g = DirectedGraph::new(3, &[]).unwrap();
        assert_eq!(g.num_edges(), 0);
        g.validate().unwrap();
    }

    #[test]
    fn rejects_bad_edges() {
        assert_eq!(DirectedGraph::new(2, &[(0, 0, 1.0)]), Err(Error::SelfLoop(0)));
        assert_eq!(
            DirectedGraph::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 1, 2.0)]),
            Err(Error::DuplicateEdge(0, 1))
        );
        assert!(matches!(
            DirectedGraph::new(2, &[(0, 2, 1.0)]),
            Err(Error::NodeOutOfRange { tail: 0, head: 2, n: 2 })
        ));
        assert!(matches!(
            DirectedGraph::new(2, &[(0, 1, -1.0)]),
            Err(Error::InvalidWeight(0, 1, _))
        ));
        // both directions listed as undirected edges collide
        assert_eq!(
            DirectedGraph::undirected(2, &[(0, 1, 1.0), (1, 0, 1.0)]),
            Err(Error::DuplicateEdge(0, 1))
        );
    }

    #[test]
    fn default_theta_is_inverse_out_degree() {
        let g = DirectedGraph::new(6, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (0, 4, 1.0), (5, 0, 1.0)])
            .unwrap()
            .with_default_params(0.5)
            .unwrap();
        for e in g.out_edges(0) {
            assert_eq!(g.theta(e), 0.25);
            assert_eq!(g.prob(e), 0.5);
        }
        let e = g.find_edge(5, 0).unwrap();
        assert_eq!(g.theta(e), 1.0);
        assert!(DirectedGraph::new(2, &[]).unwrap().with_default_params(1.5).is_err());
    }

    #[test]
    fn default_params_idempotent() {
        let g = DirectedGraph::undirected(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (0, 3, 0.5)]).unwrap();
        let once = g.clone().with_default_params(0.5).unwrap();
        let twice = once.clone().with_default_params(0.5).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
    }

    #[test]
    fn undirected_expands_to_arcs() {
        let g = DirectedGraph::undirected(3, &[(0, 1, 2.0), (1, 2, 3.0)]).unwrap();
        assert_eq!(g.num_edges(), 4);
        assert_eq!(g.weight(g.find_edge(1, 0).unwrap()), 2.0);
        assert_eq!(g.weight(g.find_edge(2, 1).unwrap()), 3.0);
        assert!(g.is_symmetrized());
    }

    #[test]
    fn seed_validation() {
        assert_eq!(SeedSet::new(vec![], 2, 3), Err(Error::EmptySeeds));
        assert_eq!(SeedSet::new(vec![(0, 1), (0, 2)], 2, 3), Err(Error::DuplicateSeed(0)));
        assert!(SeedSet::new(vec![(0, 3)], 2, 3).is_err());
        assert!(SeedSet::new(vec![(0, 0)], 2, 3).is_err());
        assert!(SeedSet::new(vec![(5, 1)], 2, 3).is_err());
        let s = SeedSet::new(vec![(0, 2), (1, 1), (2, 2)], 2, 3).unwrap();
        assert_eq!(s.majority_label(), 2);
    }

    #[test]
    fn prediction_validator() {
        let p = PredictionMatrix::from_counts(2, 1, &[0, 4, 1, 3], 4);
        p.validate(None).unwrap();
        let bad = PredictionMatrix::from_rows(1, 1, vec![0.3, 0.3]).unwrap();
        assert!(bad.validate(None).is_err());
    }
}
