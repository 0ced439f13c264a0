//! Exact answers by enumerating every activation pattern of a discrete
//! cascade, and a literal step-by-step simulator.
//!
//! Only edges with `0 < p < 1` are enumerated; certain and impossible edges
//! are fixed. Within one pattern, a node reached at hop level `d` picks its
//! infector uniformly among its active in-neighbours at level `d − 1`, which
//! is the law of a uniformly random pop order among equal distances. The
//! resulting label distribution of a node is the average of its possible
//! infectors' distributions, and infector choices at different levels are
//! independent, so everything below is a finite deterministic sum.

use rand::Rng;

use crate::dynamics::DelayModel;
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, EdgeId, NodeId, PredictionMatrix, SeedSet, NULL_LABEL};
use crate::matrix::DenseMatrix;
use crate::propagation::InstanceOutcome;

/// Largest number of uncertain edges the oracle will enumerate.
pub const MAX_UNCERTAIN_EDGES: usize = 20;

/// Exact label probabilities, expected infector matrix and covariance bias.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    /// `n × (L+1)`, column 0 is the never-infected mass.
    pub f: PredictionMatrix,
    /// `E[T]` where `T_uv = 1` iff `v` infected `u` (seeds and uninfected
    /// nodes are their own infector).
    pub infector: DenseMatrix,
    /// `b_uℓ = Σ_v Cov(T_uv, Y_vℓ)`, `n × (L+1)`.
    pub bias: DenseMatrix,
    /// Uncertain edges in enumeration bit order.
    pub uncertain_edges: Vec<EdgeId>,
    /// Probability of every activation pattern, indexed by bit mask.
    pub pattern_probs: Vec<f64>,
}

struct Pattern {
    level: Vec<usize>,
    /// per node, its label distribution within this pattern
    dist: Vec<Vec<f64>>,
    /// per node, its possible infectors (uniformly chosen)
    infectors: Vec<Vec<NodeId>>,
}

fn uncertain_edges(g: &DirectedGraph) -> Result<Vec<EdgeId>> {
    g.require_params()?;
    let edges: Vec<EdgeId> = (0..g.num_edges())
        .filter(|&e| g.prob(e) > 0.0 && g.prob(e) < 1.0)
        .collect();
    if edges.len() > MAX_UNCERTAIN_EDGES {
        return Err(Error::TooManyEdges { uncertain: edges.len(), limit: MAX_UNCERTAIN_EDGES });
    }
    Ok(edges)
}

fn pattern_prob(g: &DirectedGraph, uncertain: &[EdgeId], mask: u64) -> f64 {
    uncertain
        .iter()
        .enumerate()
        .map(|(i, &e)| if mask >> i & 1 == 1 { g.prob(e) } else { 1.0 - g.prob(e) })
        .product()
}

fn active_edges(g: &DirectedGraph, uncertain: &[EdgeId], mask: u64) -> Vec<bool> {
    let mut active: Vec<bool> = (0..g.num_edges()).map(|e| g.prob(e) >= 1.0).collect();
    for (i, &e) in uncertain.iter().enumerate() {
        active[e] = mask >> i & 1 == 1;
    }
    active
}

fn evaluate_pattern(g: &DirectedGraph, seeds: &SeedSet, active: &[bool]) -> Pattern {
    let n = g.num_nodes();
    let width = seeds.num_labels() + 1;
    let mut level = vec![usize::MAX; n];
    let mut dist = vec![vec![0.0; width]; n];
    let mut infectors = vec![Vec::new(); n];
    let mut frontier = Vec::new();
    for &(s, l) in seeds.entries() {
        level[s] = 0;
        dist[s][l as usize] = 1.0;
        frontier.push(s);
    }
    let mut depth = 0;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &w in &frontier {
            for e in g.out_edges(w) {
                let u = g.target(e);
                if !active[e] || (level[u] != usize::MAX && level[u] <= depth) {
                    continue;
                }
                if level[u] == usize::MAX {
                    level[u] = depth + 1;
                    next.push(u);
                }
                infectors[u].push(w);
            }
        }
        for &u in &next {
            let k = infectors[u].len() as f64;
            let mut row = vec![0.0; width];
            for &w in &infectors[u] {
                for (r, x) in row.iter_mut().zip(&dist[w]) {
                    *r += x / k;
                }
            }
            dist[u] = row;
        }
        frontier = next;
        depth += 1;
    }
    for v in 0..n {
        if level[v] == usize::MAX {
            dist[v][NULL_LABEL as usize] = 1.0;
        }
    }
    Pattern { level, dist, infectors }
}

/// Enumerates every activation pattern and accumulates `f`, `E[T]`, and the
/// bias. Requires edge parameters and at most [`MAX_UNCERTAIN_EDGES`]
/// uncertain edges.
pub fn solve(g: &DirectedGraph, seeds: &SeedSet) -> Result<ExactSolution> {
    let uncertain = uncertain_edges(g)?;
    let n = g.num_nodes();
    if let Some(&(node, _)) = seeds.entries().iter().find(|e| e.0 >= n) {
        return Err(Error::SeedOutOfRange { node, n });
    }
    let width = seeds.num_labels() + 1;
    let mut f = DenseMatrix::zeros(n, width);
    let mut tbar = DenseMatrix::zeros(n, n);
    // E[T_uv Y_vℓ], summed over v
    let mut joint = DenseMatrix::zeros(n, width);
    let mut pattern_probs = Vec::with_capacity(1 << uncertain.len());

    for mask in 0..(1u64 << uncertain.len()) {
        let prob = pattern_prob(g, &uncertain, mask);
        pattern_probs.push(prob);
        if prob == 0.0 {
            continue;
        }
        let pat = evaluate_pattern(g, seeds, &active_edges(g, &uncertain, mask));
        for u in 0..n {
            for l in 0..width {
                f[(u, l)] += prob * pat.dist[u][l];
            }
            let choices = &pat.infectors[u];
            if pat.level[u] == 0 || pat.level[u] == usize::MAX {
                tbar[(u, u)] += prob;
                for l in 0..width {
                    joint[(u, l)] += prob * pat.dist[u][l];
                }
            } else {
                let share = prob / choices.len() as f64;
                for &w in choices {
                    tbar[(u, w)] += share;
                    for l in 0..width {
                        joint[(u, l)] += share * pat.dist[w][l];
                    }
                }
            }
        }
    }

    // b_uℓ = Σ_v E[T_uv Y_vℓ] − Σ_v T̄_uv f_vℓ
    let tf = tbar.matmul(&f);
    let mut bias = DenseMatrix::zeros(n, width);
    for u in 0..n {
        for l in 0..width {
            bias[(u, l)] = joint[(u, l)] - tf[(u, l)];
        }
    }
    // summing many pattern weights lets row sums drift from 1 by rounding
    for u in 0..n {
        let row_sum: f64 = (0..width).map(|l| f[(u, l)]).sum();
        for l in 0..width {
            f[(u, l)] /= row_sum;
        }
    }
    let f = PredictionMatrix::from_rows(n, seeds.num_labels(), f.data().to_vec())?;
    Ok(ExactSolution { f, infector: tbar, bias, uncertain_edges: uncertain, pattern_probs })
}

/// Exact label probabilities.
pub fn exact_f(g: &DirectedGraph, seeds: &SeedSet) -> Result<PredictionMatrix> {
    Ok(solve(g, seeds)?.f)
}

/// Expected infector matrix and bias `(T̄, b)`.
pub fn exact_infector_and_bias(g: &DirectedGraph, seeds: &SeedSet) -> Result<(DenseMatrix, DenseMatrix)> {
    let s = solve(g, seeds)?;
    Ok((s.infector, s.bias))
}

fn check_shapes(f: &DenseMatrix, tbar: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    let n = f.rows();
    if tbar.rows() != n || tbar.cols() != n || b.rows() != n || b.cols() != f.cols() {
        return Err(Error::ShapeMismatch(format!(
            "f {}×{}, T {}×{}, b {}×{}",
            f.rows(),
            f.cols(),
            tbar.rows(),
            tbar.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// Entrywise `f − T̄f − b`. Shapes must already agree.
pub fn residual_matrix(f: &DenseMatrix, tbar: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let tf = tbar.matmul(f);
    let mut r = DenseMatrix::zeros(f.rows(), f.cols());
    for u in 0..f.rows() {
        for l in 0..f.cols() {
            r[(u, l)] = f[(u, l)] - tf[(u, l)] - b[(u, l)];
        }
    }
    r
}

/// `‖(I − T̄) f − b‖_F`.
pub fn laplacian_residual(f: &DenseMatrix, tbar: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    check_shapes(f, tbar, b)?;
    Ok(residual_matrix(f, tbar, b).frobenius())
}

/// `Σ_ℓ Σ_u (f'_uℓ − Σ_v T̄_uv f'_vℓ − b_uℓ)²`, minimized at the exact `f`.
pub fn quadratic_objective(f_prime: &DenseMatrix, tbar: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    check_shapes(f_prime, tbar, b)?;
    Ok(residual_matrix(f_prime, tbar, b).data().iter().map(|x| x * x).sum())
}

/// Expected number of infected nodes for seed nodes `seeds`.
pub fn exact_influence(g: &DirectedGraph, seeds: &[NodeId]) -> Result<f64> {
    let n = g.num_nodes();
    let set = SeedSet::new(seeds.iter().map(|&s| (s, 1)).collect(), 1, n)?;
    let uncertain = uncertain_edges(g)?;
    let mut total = 0.0;
    let mut seen = vec![false; n];
    let mut stack = Vec::new();
    for mask in 0..(1u64 << uncertain.len()) {
        let prob = pattern_prob(g, &uncertain, mask);
        if prob == 0.0 {
            continue;
        }
        let active = active_edges(g, &uncertain, mask);
        seen.fill(false);
        stack.clear();
        for s in set.nodes() {
            seen[s] = true;
            stack.push(s);
        }
        let mut reached = set.len();
        while let Some(w) = stack.pop() {
            for e in g.out_edges(w) {
                let u = g.target(e);
                if active[e] && !seen[u] {
                    seen[u] = true;
                    reached += 1;
                    stack.push(u);
                }
            }
        }
        total += prob * reached as f64;
    }
    Ok(total)
}

/// Literal discrete-time competitive cascade. Every node infected at step
/// `t` tries each uninfected out-neighbour once at step `t + 1`; a node hit
/// by several infectors in the same step takes the one with the smallest
/// tie key. Only unit-delay models are accepted.
pub fn naive_simulate<R: Rng + ?Sized>(
    g: &DirectedGraph,
    seeds: &SeedSet,
    model: &DelayModel,
    rng: &mut R,
) -> Result<InstanceOutcome> {
    if !model.is_discrete() {
        return Err(Error::Config("naive simulation needs unit delays".into()));
    }
    if !matches!(model, DelayModel::Replay(_)) {
        g.require_params()?;
    }
    let n = g.num_nodes();
    let mut out = InstanceOutcome {
        label: vec![NULL_LABEL; n],
        dist: vec![f64::INFINITY; n],
        ancestor: vec![None; n],
        infector: (0..n).collect(),
    };
    let mut key = vec![0u64; n];
    let mut frontier = Vec::new();
    for &(s, l) in seeds.entries() {
        if s >= n {
            return Err(Error::SeedOutOfRange { node: s, n });
        }
        out.dist[s] = 0.0;
        out.label[s] = l;
        out.ancestor[s] = Some(s);
        key[s] = model.tie_key(s, rng);
        frontier.push(s);
    }
    let mut step = 0.0;
    let mut best: Vec<Option<NodeId>> = vec![None; n];
    while !frontier.is_empty() {
        let mut hit = Vec::new();
        for &w in &frontier {
            for e in g.out_edges(w) {
                let u = g.target(e);
                if out.dist[u] <= step {
                    continue;
                }
                if model.sample_delay(g, e, rng) == f64::INFINITY {
                    continue;
                }
                match best[u] {
                    None => {
                        best[u] = Some(w);
                        hit.push(u);
                    }
                    Some(cur) if (key[w], w) < (key[cur], cur) => best[u] = Some(w),
                    Some(_) => {}
                }
            }
        }
        step += 1.0;
        hit.sort_unstable();
        for &u in &hit {
            let w = best[u].take().expect("hit nodes have an infector");
            out.dist[u] = step;
            out.label[u] = out.label[w];
            out.ancestor[u] = out.ancestor[w];
            out.infector[u] = w;
            key[u] = model.tie_key(u, rng);
        }
        frontier = hit;
    }
    Ok(out)
}

/// Label distribution of every node under one fixed activation pattern.
pub fn pattern_distribution(g: &DirectedGraph, seeds: &SeedSet, active: &[bool]) -> Vec<Vec<f64>> {
    evaluate_pattern(g, seeds, active).dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::instance_rng;

    fn chain_half() -> (DirectedGraph, SeedSet) {
        let g = DirectedGraph::new(3, &[(0, 1, 1.0), (1, 2, 1.0)])
            .unwrap()
            .with_default_params(0.5)
            .unwrap();
        (g, SeedSet::new(vec![(0, 1)], 1, 3).unwrap())
    }

    #[test]
    fn chain_values() {
        let (g, seeds) = chain_half();
        let s = solve(&g, &seeds).unwrap();
        assert_eq!(s.f.row(2), &[0.75, 0.25]);
        assert_eq!(s.f.row(1), &[0.5, 0.5]);
        assert_eq!(s.infector[(2, 1)], 0.25);
        assert_eq!(s.infector[(2, 2)], 0.75);
        assert!((s.bias[(2, 1)] + 0.0625).abs() < 1e-15);
        // row 2 of T̄f + b reproduces f
        let tf = s.infector.matmul(&s.f.to_dense());
        assert!((tf[(2, 1)] + s.bias[(2, 1)] - 0.25).abs() < 1e-15);
        assert_eq!(s.pattern_probs.len(), 4);
        assert_eq!(exact_influence(&g, &[0]).unwrap(), 1.75);
    }

    #[test]
    fn single_edge() {
        let g = DirectedGraph::new(2, &[(0, 1, 1.0)])
            .unwrap()
            .with_edge_params(vec![0.6], vec![1.0])
            .unwrap();
        let f = exact_f(&g, &SeedSet::new(vec![(0, 1)], 1, 2).unwrap()).unwrap();
        assert!((f.get(1, 0) - 0.4).abs() < 1e-15);
        assert!((f.get(1, 1) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn symmetric_competition() {
        let g = DirectedGraph::new(3, &[(0, 2, 1.0), (1, 2, 1.0)])
            .unwrap()
            .with_default_params(1.0)
            .unwrap();
        let seeds = SeedSet::new(vec![(0, 1), (1, 2)], 2, 3).unwrap();
        let s = solve(&g, &seeds).unwrap();
        assert_eq!(s.f.row(2), &[0.0, 0.5, 0.5]);
        assert_eq!(s.bias.max_abs(), 0.0);
        assert_eq!(s.infector[(0, 0)], 1.0);
        assert_eq!(s.infector[(2, 0)], 0.5);
    }

    #[test]
    fn ties_split_over_infectors_not_seeds() {
        // A reaches u through two level-1 nodes, B through one
        let g = DirectedGraph::new(
            6,
            &[(0, 2, 1.0), (0, 3, 1.0), (1, 4, 1.0), (2, 5, 1.0), (3, 5, 1.0), (4, 5, 1.0)],
        )
        .unwrap()
        .with_default_params(1.0)
        .unwrap();
        let seeds = SeedSet::new(vec![(0, 1), (1, 2)], 2, 6).unwrap();
        let f = exact_f(&g, &seeds).unwrap();
        assert!((f.get(5, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((f.get(5, 2) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn residual_and_objective() {
        let (g, seeds) = chain_half();
        let s = solve(&g, &seeds).unwrap();
        let f = s.f.to_dense();
        let r = laplacian_residual(&f, &s.infector, &s.bias).unwrap();
        assert!(r <= 1e-12);
        let obj = quadratic_objective(&f, &s.infector, &s.bias).unwrap();
        assert_eq!(obj, r * r);
        let mut moved = f.clone();
        moved[(1, 1)] += 0.1;
        assert!(quadratic_objective(&moved, &s.infector, &s.bias).unwrap() > obj);
        let wrong = DenseMatrix::zeros(2, 2);
        assert!(laplacian_residual(&wrong, &s.infector, &s.bias).is_err());
    }

    #[test]
    fn too_many_edges() {
        let edges: Vec<_> = (0..22).map(|i| (i, i + 1, 1.0)).collect();
        let g = DirectedGraph::new(23, &edges).unwrap().with_default_params(0.5).unwrap();
        let seeds = SeedSet::new(vec![(0, 1)], 1, 23).unwrap();
        assert!(matches!(solve(&g, &seeds), Err(Error::TooManyEdges { uncertain: 22, .. })));
        // certain edges are not enumerated
        let g = DirectedGraph::new(23, &edges).unwrap().with_default_params(1.0).unwrap();
        assert_eq!(exact_influence(&g, &[0]).unwrap(), 23.0);
    }

    #[test]
    fn influence_edge_cases() {
        let g = DirectedGraph::new(4, &[]).unwrap().with_default_params(1.0).unwrap();
        assert_eq!(exact_influence(&g, &[0, 3]).unwrap(), 2.0);
    }

    #[test]
    fn naive_simulator_basics() {
        let edges: Vec<_> = (0..5).map(|i| (i, i + 1, 1.0)).collect();
        let g = DirectedGraph::undirected(6, &edges).unwrap().with_default_params(1.0).unwrap();
        let seeds = SeedSet::new(vec![(0, 1), (5, 2)], 2, 6).unwrap();
        let out = naive_simulate(&g, &seeds, &DelayModel::IcUnit, &mut instance_rng(0, 0)).unwrap();
        assert_eq!(out.label, vec![1, 1, 1, 2, 2, 2]);

        let g = DirectedGraph::undirected(6, &edges).unwrap().with_default_params(0.0).unwrap();
        let out = naive_simulate(&g, &seeds, &DelayModel::IcUnit, &mut instance_rng(0, 0)).unwrap();
        assert_eq!(out.label, vec![1, 0, 0, 0, 0, 2]);
        assert!(naive_simulate(&g, &seeds, &DelayModel::ctic(), &mut instance_rng(0, 0)).is_err());
    }
}
