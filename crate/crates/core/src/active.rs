//! Confidence scores and seed selection by influence maximization.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::DelayModel;
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, EdgeId, NodeId, PredictionMatrix};
use crate::oracle;

/// `σ_v = 1 − f̂_v∅` and their sum, the expected number of infected nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Confidence {
    pub per_node: Vec<f64>,
    pub total: f64,
}

pub fn confidence(f: &PredictionMatrix) -> Confidence {
    let per_node: Vec<f64> = (0..f.num_nodes()).map(|v| 1.0 - f.get(v, 0)).collect();
    let total = per_node.iter().sum();
    Confidence { per_node, total }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Seeds in pick order.
    pub chosen: Vec<NodeId>,
    /// Estimated influence gain of each pick, when evaluated.
    pub marginal_gains: Vec<f64>,
    /// Monte-Carlo instances behind each gain (0 for exact evaluation).
    pub estimates: Vec<usize>,
}

impl SelectionResult {
    pub fn total_gain(&self) -> f64 {
        self.marginal_gains.iter().sum()
    }
}

/// A monotone set function evaluated incrementally: `gain` is the marginal
/// value of adding `v` to the committed set.
pub trait InfluenceObjective: Sync {
    fn gain(&self, v: NodeId) -> f64;
    fn commit(&mut self, v: NodeId);
    /// Monte-Carlo instances behind one evaluation (0 if exact).
    fn samples(&self) -> usize;

    fn gains(&self, vs: &[NodeId]) -> Vec<f64> {
        vs.iter().map(|&v| self.gain(v)).collect()
    }
}

/// Lazy greedy maximization (CELF). Stale upper bounds are re-evaluated only
/// when they reach the top of the queue; equal gains go to the smaller node.
pub fn lazy_greedy<O: InfluenceObjective>(objective: &mut O, candidates: &[NodeId], k: usize) -> SelectionResult {
    let initial = objective.gains(candidates);
    let mut heap: BinaryHeap<(OrderedFloat<f64>, Reverse<NodeId>, usize)> = candidates
        .iter()
        .zip(initial)
        .map(|(&v, g)| (OrderedFloat(g), Reverse(v), 0))
        .collect();
    let mut result = SelectionResult::default();
    while result.chosen.len() < k {
        let Some((OrderedFloat(gain), Reverse(v), round)) = heap.pop() else {
            break;
        };
        if round == result.chosen.len() {
            objective.commit(v);
            result.chosen.push(v);
            result.marginal_gains.push(gain);
            result.estimates.push(objective.samples());
        } else {
            let fresh = objective.gain(v);
            heap.push((OrderedFloat(fresh), Reverse(v), result.chosen.len()));
        }
    }
    result
}

/// Exact influence by activation-pattern enumeration (small graphs only).
pub struct ExactInfluence<'a> {
    graph: &'a DirectedGraph,
    chosen: Vec<NodeId>,
    current: f64,
}

impl<'a> ExactInfluence<'a> {
    pub fn new(graph: &'a DirectedGraph) -> Result<Self> {
        // surface enumeration limits up front
        if graph.num_nodes() > 0 {
            oracle::exact_influence(graph, &[0])?;
        }
        Ok(Self { graph, chosen: Vec::new(), current: 0.0 })
    }
}

impl InfluenceObjective for ExactInfluence<'_> {
    fn gain(&self, v: NodeId) -> f64 {
        if self.chosen.contains(&v) {
            return 0.0;
        }
        let mut set = self.chosen.clone();
        set.push(v);
        oracle::exact_influence(self.graph, &set).expect("checked at construction") - self.current
    }

    fn commit(&mut self, v: NodeId) {
        self.chosen.push(v);
        self.current = oracle::exact_influence(self.graph, &self.chosen).expect("checked at construction");
    }

    fn samples(&self) -> usize {
        0
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Influence estimated over a fixed ensemble of live-edge graphs. Each
/// edge's state in instance `i` is a pure function of `(seed, i, edge)`, so
/// every candidate is scored against the same random instances.
pub struct MonteCarloInfluence<'a> {
    graph: &'a DirectedGraph,
    model: &'a DelayModel,
    seed: u64,
    samples: usize,
    words: usize,
    covered: Vec<u64>,
}

impl<'a> MonteCarloInfluence<'a> {
    pub fn new(graph: &'a DirectedGraph, model: &'a DelayModel, samples: usize, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::ZeroSamples);
        }
        model.check(graph)?;
        let words = graph.num_nodes().div_ceil(64);
        Ok(Self { graph, model, seed, samples, words, covered: vec![0; words * samples] })
    }

    fn live(&self, instance: usize, e: EdgeId) -> bool {
        match self.model {
            DelayModel::Replay(t) => t.delays()[e].is_finite(),
            _ => {
                let p = self.graph.prob(e);
                if p >= 1.0 {
                    return true;
                }
                let h = mix(mix(self.seed ^ mix(instance as u64)) ^ e as u64);
                ((h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)) < p
            }
        }
    }

    /// Marks everything reachable from `v` in instance `i` that is not yet
    /// in `seen`, returning how many nodes were added. `seen` must be closed
    /// under reachability, which holds for unions of reach sets.
    fn reach_into(&self, i: usize, v: NodeId, seen: &mut [u64]) -> usize {
        let is_set = |bits: &[u64], x: usize| bits[x / 64] >> (x % 64) & 1 == 1;
        if is_set(seen, v) {
            return 0;
        }
        seen[v / 64] |= 1 << (v % 64);
        let mut stack = vec![v];
        let mut count = 1;
        while let Some(w) = stack.pop() {
            for e in self.graph.out_edges(w) {
                let u = self.graph.target(e);
                if !is_set(seen, u) && self.live(i, e) {
                    seen[u / 64] |= 1 << (u % 64);
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count
    }

    fn fresh_reach(&self, i: usize, v: NodeId) -> usize {
        let mut seen = self.covered[i * self.words..(i + 1) * self.words].to_vec();
        self.reach_into(i, v, &mut seen)
    }

    fn total_fresh(&self, v: NodeId) -> u64 {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..self.samples).into_par_iter().map(|i| self.fresh_reach(i, v) as u64).sum()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..self.samples).map(|i| self.fresh_reach(i, v) as u64).sum()
        }
    }
}

impl InfluenceObjective for MonteCarloInfluence<'_> {
    fn gain(&self, v: NodeId) -> f64 {
        self.total_fresh(v) as f64 / self.samples as f64
    }

    fn commit(&mut self, v: NodeId) {
        let mut covered = std::mem::take(&mut self.covered);
        for (i, chunk) in covered.chunks_mut(self.words).enumerate() {
            self.reach_into(i, v, chunk);
        }
        self.covered = covered;
    }

    fn samples(&self) -> usize {
        self.samples
    }
}

/// Nodes by decreasing out-degree, ties by index.
fn degree_order(g: &DirectedGraph) -> Vec<NodeId> {
    let mut nodes: Vec<NodeId> = (0..g.num_nodes()).collect();
    nodes.sort_by_key(|&v| (Reverse(g.out_degree(v)), v));
    nodes
}

fn check_budget(g: &DirectedGraph, k: usize) -> Result<()> {
    if k > g.num_nodes() {
        return Err(Error::BudgetTooLarge { k, n: g.num_nodes() });
    }
    Ok(())
}

/// Greedy influence maximization with Monte-Carlo estimates. `candidates`
/// restricts the pool to the highest-degree nodes.
pub fn greedy_select(
    g: &DirectedGraph,
    model: &DelayModel,
    k: usize,
    samples: usize,
    master_seed: u64,
    candidates: Option<usize>,
) -> Result<SelectionResult> {
    check_budget(g, k)?;
    let mut pool = degree_order(g);
    if let Some(cap) = candidates {
        pool.truncate(cap.max(k));
    }
    pool.sort_unstable();
    let mut objective = MonteCarloInfluence::new(g, model, samples, master_seed)?;
    Ok(lazy_greedy(&mut objective, &pool, k))
}

/// Greedy selection scored by exact enumeration.
pub fn greedy_select_exact(g: &DirectedGraph, k: usize) -> Result<SelectionResult> {
    check_budget(g, k)?;
    let mut objective = ExactInfluence::new(g)?;
    let pool: Vec<NodeId> = (0..g.num_nodes()).collect();
    Ok(lazy_greedy(&mut objective, &pool, k))
}

/// Top-`k` nodes by out-degree, ties by index.
pub fn hideg_select(g: &DirectedGraph, k: usize) -> Result<SelectionResult> {
    check_budget(g, k)?;
    let mut chosen = degree_order(g);
    chosen.truncate(k);
    Ok(SelectionResult { chosen, ..Default::default() })
}

/// `k` distinct nodes uniformly at random.
pub fn random_select<R: Rng + ?Sized>(g: &DirectedGraph, k: usize, rng: &mut R) -> Result<SelectionResult> {
    check_budget(g, k)?;
    let chosen = rand::seq::index::sample(rng, g.num_nodes(), k).into_vec();
    Ok(SelectionResult { chosen, ..Default::default() })
}

/// Fills in the marginal gains of an existing pick order.
pub fn evaluate_order<O: InfluenceObjective>(objective: &mut O, result: &mut SelectionResult) {
    result.marginal_gains.clear();
    result.estimates.clear();
    for &v in &result.chosen {
        result.marginal_gains.push(objective.gain(v));
        result.estimates.push(objective.samples());
        objective.commit(v);
    }
}
