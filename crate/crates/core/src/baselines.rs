//! Reference predictors: harmonic label propagation and nearest-seed
//! shortest paths.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, NodeId, PredictionMatrix, SeedSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelPropConfig {
    /// Stop when no entry moves by more than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Use `(W + Wᵀ) / 2` as the affinity.
    pub symmetrize: bool,
}

impl Default for LabelPropConfig {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iterations: 10_000, symmetrize: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelPropOutput {
    pub prediction: PredictionMatrix,
    pub iterations: usize,
    pub converged: bool,
}

/// Row-normalized affinity `D⁻¹W` as adjacency lists.
fn transition(g: &DirectedGraph, symmetrize: bool) -> Vec<Vec<(NodeId, f64)>> {
    let n = g.num_nodes();
    let mut adj: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
    for (u, v, w) in g.edges() {
        if symmetrize {
            adj[u].push((v, w / 2.0));
            adj[v].push((u, w / 2.0));
        } else {
            adj[u].push((v, w));
        }
    }
    for row in &mut adj {
        row.sort_by_key(|&(v, _)| v);
        row.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        row.retain(|&(_, w)| w > 0.0);
        let degree: f64 = row.iter().map(|&(_, w)| w).sum();
        for (_, w) in row.iter_mut() {
            *w /= degree;
        }
    }
    adj
}

/// Iterates `f ← D⁻¹W f` with seed rows clamped. Unlabeled nodes start at
/// the uniform distribution, so nodes with no path to any seed stay at
/// `1/L`. Column 0 is always zero.
pub fn labelprop(g: &DirectedGraph, seeds: &SeedSet, config: &LabelPropConfig) -> Result<LabelPropOutput> {
    if !(config.tolerance > 0.0) || config.max_iterations == 0 {
        return Err(Error::Config(format!("invalid label propagation config {config:?}")));
    }
    let n = g.num_nodes();
    let num_labels = seeds.num_labels();
    if let Some(&(node, _)) = seeds.entries().iter().find(|e| e.0 >= n) {
        return Err(Error::SeedOutOfRange { node, n });
    }
    let width = num_labels + 1;
    let adj = transition(g, config.symmetrize);
    let clamped = seeds.mask(n);

    let mut f = vec![0.0; n * width];
    for v in 0..n {
        for l in 1..width {
            f[v * width + l] = 1.0 / num_labels as f64;
        }
    }
    for &(s, l) in seeds.entries() {
        f[s * width..(s + 1) * width].fill(0.0);
        f[s * width + l as usize] = 1.0;
    }

    let mut next = f.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut change: f64 = 0.0;
        for u in 0..n {
            if clamped[u] || adj[u].is_empty() {
                continue;
            }
            let row = &mut next[u * width..(u + 1) * width];
            row.fill(0.0);
            for &(v, w) in &adj[u] {
                for l in 1..width {
                    row[l] += w * f[v * width + l];
                }
            }
            for l in 1..width {
                change = change.max((row[l] - f[u * width + l]).abs());
            }
        }
        std::mem::swap(&mut f, &mut next);
        if change < config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("label propagation stopped after {iterations} iterations without converging");
    }
    Ok(LabelPropOutput {
        prediction: PredictionMatrix::from_rows(n, num_labels, f)?,
        iterations,
        converged,
    })
}

/// Nearest-seed labeling by weighted distance. Seeds tied at the minimum
/// distance share the node's mass equally; unreachable nodes are all null.
pub fn shortpaths(g: &DirectedGraph, seeds: &SeedSet) -> Result<PredictionMatrix> {
    let n = g.num_nodes();
    if let Some(&(node, _)) = seeds.entries().iter().find(|e| e.0 >= n) {
        return Err(Error::SeedOutOfRange { node, n });
    }
    if let Some((u, v, w)) = g.edges().find(|e| !(e.2 >= 0.0)) {
        return Err(Error::InvalidWeight(u, v, w));
    }
    let k = seeds.len();
    let words = k.div_ceil(64);

    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    for s in seeds.nodes() {
        dist[s] = 0.0;
        heap.push(Reverse((OrderedFloat(0.0), s)));
    }
    let mut order = Vec::with_capacity(n);
    let mut done = vec![false; n];
    while let Some(Reverse((OrderedFloat(d), v))) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        order.push(v);
        for e in g.out_edges(v) {
            let u = g.target(e);
            let alt = d + g.weight(e);
            if alt < dist[u] {
                dist[u] = alt;
                heap.push(Reverse((OrderedFloat(alt), u)));
            }
        }
    }

    // set of distance-minimizing seeds per node, as bitsets over seed index
    let mut minimizers = vec![0u64; n * words];
    for (i, s) in seeds.nodes().enumerate() {
        minimizers[s * words + i / 64] |= 1 << (i % 64);
    }
    // zero-weight edges can link equal-distance nodes in either pop order,
    // so sweep until the sets stop growing
    let is_seed = seeds.mask(n);
    loop {
        let mut grew = false;
        for &u in &order {
            if is_seed[u] {
                continue;
            }
            for &e in g.in_edges(u) {
                let w = g.source(e);
                if dist[w] + g.weight(e) != dist[u] {
                    continue;
                }
                for i in 0..words {
                    let add = minimizers[w * words + i] & !minimizers[u * words + i];
                    if add != 0 {
                        minimizers[u * words + i] |= add;
                        grew = true;
                    }
                }
            }
        }
        if !grew {
            break;
        }
    }

    let labels: Vec<_> = seeds.entries().iter().map(|e| e.1).collect();
    let mut f = PredictionMatrix::zeros(n, seeds.num_labels());
    for v in 0..n {
        let row = f.row_mut(v);
        if dist[v] == f64::INFINITY {
            row[0] = 1.0;
            continue;
        }
        let bits = &minimizers[v * words..(v + 1) * words];
        let count: u32 = bits.iter().map(|b| b.count_ones()).sum();
        for (i, &l) in labels.iter().enumerate() {
            if bits[i / 64] >> (i % 64) & 1 == 1 {
                row[l as usize] += 1.0 / count as f64;
            }
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_label_floods_component() {
        let g = DirectedGraph::undirected(4, &[(0, 1, 1.0), (1, 2, 3.0), (2, 3, 0.5), (3, 1, 2.0)]).unwrap();
        let seeds = SeedSet::new(vec![(0, 1)], 1, 4).unwrap();
        let out = labelprop(&g, &seeds, &LabelPropConfig::default()).unwrap();
        assert!(out.converged);
        for v in 0..4 {
            assert_eq!(out.prediction.row(v), &[0.0, 1.0]);
        }
    }

    #[test]
    fn path_midpoint_splits() {
        let g = DirectedGraph::undirected(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let seeds = SeedSet::new(vec![(0, 1), (2, 2)], 2, 3).unwrap();
        let out = labelprop(&g, &seeds, &LabelPropConfig::default()).unwrap();
        assert_eq!(out.prediction.row(1), &[0.0, 0.5, 0.5]);
        assert_eq!(out.prediction.row(0), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn seedless_component_is_uniform() {
        let g = DirectedGraph::undirected(5, &[(0, 1, 1.0), (2, 3, 1.0), (3, 4, 2.0)]).unwrap();
        let seeds = SeedSet::new(vec![(0, 1), (1, 3)], 3, 5).unwrap();
        let out = labelprop(&g, &seeds, &LabelPropConfig::default()).unwrap();
        for v in 2..5 {
            for l in 1..=3 {
                assert!((out.prediction.get(v, l) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        out.prediction.validate(Some(&seeds)).unwrap();
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let edges: Vec<_> = (0..30).map(|i| (i, i + 1, 1.0)).collect();
        let g = DirectedGraph::undirected(31, &edges).unwrap();
        let seeds = SeedSet::new(vec![(0, 1), (30, 2)], 2, 31).unwrap();
        let cfg = LabelPropConfig { max_iterations: 3, ..Default::default() };
        let out = labelprop(&g, &seeds, &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
        assert!(labelprop(&g, &seeds, &LabelPropConfig { tolerance: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn shortpath_cases() {
        let g = DirectedGraph::undirected(4, &[(0, 1, 2.0), (1, 2, 1.0), (0, 2, 5.0)]).unwrap();
        let seeds = SeedSet::new(vec![(0, 1)], 1, 4).unwrap();
        let f = shortpaths(&g, &seeds).unwrap();
        for v in 0..3 {
            assert_eq!(f.row(v), &[0.0, 1.0]);
        }
        assert_eq!(f.row(3), &[1.0, 0.0]);

        // node 2 is at distance 2 from both seeds
        let g = DirectedGraph::undirected(5, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)]).unwrap();
        let seeds = SeedSet::new(vec![(0, 1), (4, 2)], 2, 5).unwrap();
        let f = shortpaths(&g, &seeds).unwrap();
        assert_eq!(f.row(2), &[0.0, 0.5, 0.5]);
        assert_eq!(f.row(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn shortpath_splits_by_seed_not_path_count() {
        let g = DirectedGraph::new(
            6,
            &[(0, 2, 1.0), (0, 3, 1.0), (1, 4, 1.0), (2, 5, 1.0), (3, 5, 1.0), (4, 5, 1.0)],
        )
        .unwrap();
        let seeds = SeedSet::new(vec![(0, 1), (1, 2)], 2, 6).unwrap();
        assert_eq!(shortpaths(&g, &seeds).unwrap().row(5), &[0.0, 0.5, 0.5]);
    }

    #[test]
    fn zero_weight_ties() {
        let g = DirectedGraph::undirected(4, &[(0, 2, 1.0), (1, 3, 1.0), (2, 3, 0.0)]).unwrap();
        let seeds = SeedSet::new(vec![(0, 1), (1, 2)], 2, 4).unwrap();
        let f = shortpaths(&g, &seeds).unwrap();
        assert_eq!(f.row(2), &[0.0, 0.5, 0.5]);
        assert_eq!(f.row(3), &[0.0, 0.5, 0.5]);
    }
}
