#![allow(dead_code)]

use infprop::eval::random_digraph;
use infprop::{DirectedGraph, Label, SeedSet};
use rand::Rng;

/// Random graph with per-edge `p` drawn from `[0.1, 1)` and `θ = 1`.
pub fn random_graph<R: Rng>(rng: &mut R, nodes: std::ops::RangeInclusive<usize>, max_edges: usize) -> DirectedGraph {
    let n = rng.random_range(nodes);
    let m = rng.random_range(1..=max_edges.min(n * (n - 1)));
    let g = random_digraph(n, m, rng).unwrap();
    let prob = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    g.with_edge_params(prob, vec![1.0; m]).unwrap()
}

/// Between one and three seeds on distinct nodes, labels in `1..=L`.
pub fn random_seeds<R: Rng>(rng: &mut R, n: usize, max_labels: usize) -> SeedSet {
    let num_labels = rng.random_range(1..=max_labels);
    let k = rng.random_range(1..=3.min(n - 1));
    let nodes = rand::seq::index::sample(rng, n, k);
    let entries = nodes.into_iter().map(|v| (v, rng.random_range(1..=num_labels as Label))).collect();
    SeedSet::new(entries, num_labels, n).unwrap()
}

/// Same graph with every activation probability set to 1.
pub fn certain(g: &DirectedGraph) -> DirectedGraph {
    let m = g.num_edges();
    g.clone().with_edge_params(vec![1.0; m], vec![1.0; m]).unwrap()
}
