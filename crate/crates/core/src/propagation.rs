//! Competitive infection instances computed as shortest-path ensembles, and
//! their Monte-Carlo aggregation into label probabilities.
//!
//! One instance is a single multi-source Dijkstra pass: every seed starts at
//! distance zero with its own label, edge delays are drawn lazily when their
//! tail is settled, and a node adopts the label of whichever relaxation
//! reaches it first. Equal-distance queue entries are ordered by a per-node
//! random tie key, so simultaneous arrivals are broken uniformly.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{DelayModel, LtGraph, PenaltySource, ReplayTable};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, Label, NodeId, PredictionMatrix, SeedSet, NULL_LABEL};
use crate::matrix::DenseMatrix;

/// Result of one infection instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceOutcome {
    /// Adopted label, [`NULL_LABEL`] if never infected.
    pub label: Vec<Label>,
    /// Infection time; `+∞` if never infected.
    pub dist: Vec<f64>,
    /// Seed whose infection reached the node first.
    pub ancestor: Vec<Option<NodeId>>,
    /// Immediate predecessor; the node itself for seeds and uninfected nodes.
    pub infector: Vec<NodeId>,
}

impl InstanceOutcome {
    fn empty(n: usize) -> Self {
        Self {
            label: vec![NULL_LABEL; n],
            dist: vec![f64::INFINITY; n],
            ancestor: vec![None; n],
            infector: (0..n).collect(),
        }
    }

    fn reset(&mut self) {
        self.label.fill(NULL_LABEL);
        self.dist.fill(f64::INFINITY);
        self.ancestor.fill(None);
        for (v, r) in self.infector.iter_mut().enumerate() {
            *r = v;
        }
    }
}

type QueueEntry = Reverse<(OrderedFloat<f64>, u64, u32)>;

/// Reusable buffers for repeated instances on one graph.
struct Workspace {
    out: InstanceOutcome,
    key: Vec<u64>,
    settled: Vec<bool>,
    heap: BinaryHeap<QueueEntry>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            out: InstanceOutcome::empty(n),
            key: vec![0; n],
            settled: vec![false; n],
            heap: BinaryHeap::new(),
        }
    }

    fn reset(&mut self) {
        self.out.reset();
        self.settled.fill(false);
        self.heap.clear();
    }
}

fn check_inputs(
    g: &DirectedGraph,
    seeds: &SeedSet,
    model: &DelayModel,
    penalties: Option<&PenaltySource>,
) -> Result<()> {
    model.check(g)?;
    check_seeds(g, seeds, penalties)
}

fn check_seeds(g: &DirectedGraph, seeds: &SeedSet, penalties: Option<&PenaltySource>) -> Result<()> {
    let n = g.num_nodes();
    if seeds.is_empty() {
        return Err(Error::EmptySeeds);
    }
    if let Some(&(node, _)) = seeds.entries().iter().find(|e| e.0 >= n) {
        return Err(Error::SeedOutOfRange { node, n });
    }
    if let Some(p) = penalties {
        if p.priors().num_nodes() != n || p.priors().num_labels() < seeds.num_labels() {
            return Err(Error::ShapeMismatch(format!(
                "priors are {}×{}, graph has {n} nodes and {} labels",
                p.priors().num_nodes(),
                p.priors().num_labels(),
                seeds.num_labels()
            )));
        }
    }
    Ok(())
}

fn run_into<R: Rng + ?Sized>(
    g: &DirectedGraph,
    seeds: &SeedSet,
    model: &DelayModel,
    penalties: Option<&PenaltySource>,
    rng: &mut R,
    ws: &mut Workspace,
) {
    ws.reset();
    let Workspace { out, key, settled, heap } = ws;
    for &(s, l) in seeds.entries() {
        out.dist[s] = 0.0;
        out.label[s] = l;
        out.ancestor[s] = Some(s);
        key[s] = model.tie_key(s, rng);
        heap.push(Reverse((OrderedFloat(0.0), key[s], s as u32)));
    }
    while let Some(Reverse((_, _, v))) = heap.pop() {
        let v = v as usize;
        if settled[v] {
            continue;
        }
        settled[v] = true;
        let (dv, lv, av) = (out.dist[v], out.label[v], out.ancestor[v]);
        for e in g.out_edges(v) {
            let u = g.target(e);
            if settled[u] {
                continue;
            }
            let delay = model.sample_delay(g, e, rng);
            if delay == f64::INFINITY {
                continue;
            }
            let alt = match penalties {
                Some(p) => dv + delay + p.penalty(u, lv),
                None => dv + delay,
            };
            if alt < out.dist[u] {
                if out.dist[u] == f64::INFINITY {
                    key[u] = model.tie_key(u, rng);
                }
                out.dist[u] = alt;
                out.label[u] = lv;
                out.ancestor[u] = av;
                out.infector[u] = v;
                heap.push(Reverse((OrderedFloat(alt), key[u], u as u32)));
            }
        }
    }
}

/// Runs one infection instance with a single multi-source Dijkstra pass.
pub fn run_instance<R: Rng + ?Sized>(
    g: &DirectedGraph,
    seeds: &SeedSet,
    model: &DelayModel,
    penalties: Option<&PenaltySource>,
    rng: &mut R,
) -> Result<InstanceOutcome> {
    check_inputs(g, seeds, model, penalties)?;
    let mut ws = Workspace::new(g.num_nodes());
    run_into(g, seeds, model, penalties, rng, &mut ws);
    Ok(ws.out)
}

/// Random stream of instance `index` under `master_seed`. Streams for
/// distinct indices are independent and do not depend on evaluation order.
pub fn instance_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

const CHUNK: usize = 32;

/// Sums per-instance count vectors over `0..samples`. The reduction is an
/// integer sum, so the result does not depend on how instances are split
/// across threads.
pub(crate) fn accumulate<W, F>(samples: usize, width: usize, init: impl Fn() -> W + Sync, body: F) -> Vec<u64>
where
    F: Fn(&mut W, usize, &mut [u64]) + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let run_chunk = |c: usize| {
        let mut counts = vec![0u64; width];
        let mut state = init();
        for i in c * CHUNK..((c + 1) * CHUNK).min(samples) {
            body(&mut state, i, &mut counts);
        }
        counts
    };
    let add = |mut a: Vec<u64>, b: Vec<u64>| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..chunks)
            .into_par_iter()
            .map(run_chunk)
            .reduce(|| vec![0u64; width], add)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chunks).map(run_chunk).fold(vec![0u64; width], add)
    }
}

fn tally(out: &InstanceOutcome, width: usize, counts: &mut [u64]) {
    for (v, &l) in out.label.iter().enumerate() {
        counts[v * width + l as usize] += 1;
    }
}

/// Monte-Carlo label probabilities from `samples` instances.
pub fn infprop(
    g: &DirectedGraph,
    seeds: &SeedSet,
    model: &DelayModel,
    penalties: Option<&PenaltySource>,
    samples: usize,
    master_seed: u64,
) -> Result<PredictionMatrix> {
    check_inputs(g, seeds, model, penalties)?;
    if samples == 0 {
        return Err(Error::ZeroSamples);
    }
    let n = g.num_nodes();
    let width = seeds.num_labels() + 1;
    let counts = accumulate(
        samples,
        n * width,
        || Workspace::new(n),
        |ws, i, counts| {
            let mut rng = instance_rng(master_seed, i as u64);
            run_into(g, seeds, model, penalties, &mut rng, ws);
            tally(&ws.out, width, counts);
        },
    );
    Ok(PredictionMatrix::from_counts(n, seeds.num_labels(), &counts, samples))
}

fn dijkstra_from(g: &DirectedGraph, delays: &[f64], source: NodeId, dist: &mut [f64]) {
    dist.fill(f64::INFINITY);
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((OrderedFloat(0.0), source)));
    while let Some(Reverse((OrderedFloat(d), v))) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for e in g.out_edges(v) {
            let alt = d + delays[e];
            let u = g.target(e);
            if alt < dist[u] {
                dist[u] = alt;
                heap.push(Reverse((OrderedFloat(alt), u)));
            }
        }
    }
}

fn basic_from_table(g: &DirectedGraph, seeds: &SeedSet, table: &ReplayTable) -> InstanceOutcome {
    let n = g.num_nodes();
    let delays = table.delays();
    let keys = table.tie_keys();
    let mut out = InstanceOutcome::empty(n);
    let mut scratch = vec![0.0; n];
    for &(s, _) in seeds.entries() {
        dijkstra_from(g, delays, s, &mut scratch);
        for (best, &d) in out.dist.iter_mut().zip(&scratch) {
            if d < *best {
                *best = d;
            }
        }
    }
    let is_seed = seeds.mask(n);
    for &(s, l) in seeds.entries() {
        out.label[s] = l;
        out.ancestor[s] = Some(s);
    }
    // Among seeds tied at the minimum distance, the ancestor is the one whose
    // shortest path ends in the earliest-ordered predecessor.
    let mut order: Vec<NodeId> = (0..n).filter(|&v| out.dist[v].is_finite()).collect();
    order.sort_by_key(|&v| (OrderedFloat(out.dist[v]), keys[v], v));
    for u in order {
        if is_seed[u] {
            continue;
        }
        let best = g
            .in_edges(u)
            .iter()
            .copied()
            .filter(|&e| {
                let w = g.source(e);
                out.dist[w] + delays[e] == out.dist[u] && out.dist[w] < out.dist[u]
            })
            .map(|e| g.source(e))
            .min_by_key(|&w| (OrderedFloat(out.dist[w]), keys[w], w))
            .expect("finite distance implies a predecessor");
        out.infector[u] = best;
        out.ancestor[u] = out.ancestor[best];
        out.label[u] = out.label[best];
    }
    out
}

/// One instance computed with a separate Dijkstra pass per seed over a fully
/// pre-sampled delay table.
pub fn basic_instance<R: Rng + ?Sized>(
    g: &DirectedGraph,
    seeds: &SeedSet,
    model: &DelayModel,
    rng: &mut R,
) -> Result<InstanceOutcome> {
    check_inputs(g, seeds, model, None)?;
    Ok(match model {
        DelayModel::Replay(t) => basic_from_table(g, seeds, t),
        _ => basic_from_table(g, seeds, &ReplayTable::sample(model, g, rng)),
    })
}

/// Monte-Carlo estimate using [`basic_instance`] for every sample.
pub fn basic_infprop(
    g: &DirectedGraph,
    seeds: &SeedSet,
    model: &DelayModel,
    samples: usize,
    master_seed: u64,
) -> Result<PredictionMatrix> {
    check_inputs(g, seeds, model, None)?;
    if samples == 0 {
        return Err(Error::ZeroSamples);
    }
    let n = g.num_nodes();
    let width = seeds.num_labels() + 1;
    let counts = accumulate(
        samples,
        n * width,
        || (),
        |_, i, counts| {
            let mut rng = instance_rng(master_seed, i as u64);
            let out = basic_instance(g, seeds, model, &mut rng).expect("inputs checked");
            tally(&out, width, counts);
        },
    );
    Ok(PredictionMatrix::from_counts(n, seeds.num_labels(), &counts, samples))
}

/// Number of instances after which `max |f̂ − f| ≤ eps` holds with
/// probability at least `1 − delta` (Hoeffding plus a union bound over all
/// `n (L+1)` entries).
pub fn required_samples(eps: f64, delta: f64, n: usize, num_labels: usize) -> Result<usize> {
    for (name, value) in [("epsilon", eps), ("delta", delta)] {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::InvalidTolerance { name, value });
        }
    }
    let entries = (2 * n * (num_labels + 1)) as f64;
    Ok(((entries / delta).ln() / (2.0 * eps * eps)).ceil() as usize)
}

/// Sample-count multiplier behind [`required_samples`], before rounding.
pub fn required_samples_exact(eps: f64, delta: f64, n: usize, num_labels: usize) -> f64 {
    (((2 * n * (num_labels + 1)) as f64) / delta).ln() / (2.0 * eps * eps)
}

/// Arg-max over real labels; the never-infected column is ignored. Ties go
/// to the smallest label, and rows with no label mass get `fallback`.
pub fn hard_labels(f: &PredictionMatrix, fallback: Label) -> Vec<Label> {
    let mut uncovered = 0usize;
    let labels = (0..f.num_nodes())
        .map(|v| {
            let row = f.row(v);
            let mut best = 0;
            for l in 1..row.len() {
                if row[l] > 0.0 && (best == 0 || row[l] > row[best]) {
                    best = l;
                }
            }
            if best == 0 {
                uncovered += 1;
                fallback
            } else {
                best as Label
            }
        })
        .collect();
    if uncovered > 0 {
        log::info!("{uncovered} nodes have no label mass; assigned label {fallback}");
    }
    labels
}

/// Seeds carrying binary label vectors, for multilabel prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeedSet {
    nodes: Vec<NodeId>,
    vectors: Vec<Vec<bool>>,
    num_labels: usize,
}

impl MultiSeedSet {
    pub fn new(entries: Vec<(NodeId, Vec<bool>)>, n: usize) -> Result<Self> {
        let num_labels = entries.first().map(|e| e.1.len()).ok_or(Error::EmptySeeds)?;
        if let Some(e) = entries.iter().find(|e| e.1.len() != num_labels) {
            return Err(Error::ShapeMismatch(format!(
                "seed {} has {} labels, expected {num_labels}",
                e.0,
                e.1.len()
            )));
        }
        let (nodes, vectors): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        // validates range and uniqueness
        SeedSet::new(nodes.iter().map(|&s| (s, 1)).collect(), 1, n)?;
        Ok(Self { nodes, vectors, num_labels })
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn vector(&self, i: usize) -> &[bool] {
        &self.vectors[i]
    }
}

/// Per-node average of the ancestor seed's label vector over instances.
/// Returns an `n × L` score matrix; never-infected nodes contribute zeros.
pub fn multilabel_infprop(
    g: &DirectedGraph,
    seeds: &MultiSeedSet,
    model: &DelayModel,
    samples: usize,
    master_seed: u64,
) -> Result<DenseMatrix> {
    let n = g.num_nodes();
    // every seed gets its own label index so the ancestor identity survives
    let k = seeds.nodes.len();
    let by_identity = SeedSet::new(
        seeds.nodes.iter().enumerate().map(|(i, &s)| (s, i as Label + 1)).collect(),
        k,
        n,
    )?;
    let ancestors = infprop(g, &by_identity, model, None, samples, master_seed)?;
    let mut scores = DenseMatrix::zeros(n, seeds.num_labels);
    for v in 0..n {
        for i in 0..k {
            let share = ancestors.get(v, i as Label + 1);
            if share == 0.0 {
                continue;
            }
            for (l, &on) in seeds.vectors[i].iter().enumerate() {
                if on {
                    scores[(v, l)] += share;
                }
            }
        }
    }
    Ok(scores)
}

/// One competitive linear-threshold instance. Each node accepts at most one
/// infector; when an infected neighbor is settled, its edge is tried with
/// the prior-weighted probability renormalized against the untried mass.
pub fn run_lt_instance<R: Rng + ?Sized>(
    lt: &LtGraph,
    seeds: &SeedSet,
    penalties: Option<&PenaltySource>,
    rng: &mut R,
) -> Result<InstanceOutcome> {
    let g = lt.graph();
    check_seeds(g, seeds, penalties)?;
    let n = g.num_nodes();
    let mut out = InstanceOutcome::empty(n);
    let mut remaining = vec![1.0f64; n];
    let mut key = vec![0u64; n];
    let mut heap = BinaryHeap::new();
    for &(s, l) in seeds.entries() {
        out.dist[s] = 0.0;
        out.label[s] = l;
        out.ancestor[s] = Some(s);
        key[s] = rng.random();
        heap.push(Reverse((OrderedFloat(0.0), key[s], s)));
    }
    while let Some(Reverse((_, _, v))) = heap.pop() {
        let lv = out.label[v];
        for e in g.out_edges(v) {
            let u = g.target(e);
            if out.dist[u].is_finite() {
                continue;
            }
            let w = g.weight(e);
            let m = penalties.map_or(1.0, |p| p.multiplier(u, lv));
            let denom = m * w + (remaining[u] - w).max(0.0);
            let chosen = denom > 0.0 && rng.random::<f64>() * denom < m * w;
            if chosen {
                out.dist[u] = out.dist[v] + 1.0;
                out.label[u] = lv;
                out.ancestor[u] = out.ancestor[v];
                out.infector[u] = v;
                key[u] = rng.random();
                heap.push(Reverse((OrderedFloat(out.dist[u]), key[u], u)));
            } else {
                remaining[u] -= w;
            }
        }
    }
    Ok(out)
}

/// Monte-Carlo label probabilities under linear-threshold dynamics.
pub fn lt_infprop(
    lt: &LtGraph,
    seeds: &SeedSet,
    penalties: Option<&PenaltySource>,
    samples: usize,
    master_seed: u64,
) -> Result<PredictionMatrix> {
    if samples == 0 {
        return Err(Error::ZeroSamples);
    }
    // surface input errors before spawning work
    run_lt_instance(lt, seeds, penalties, &mut instance_rng(master_seed, u64::MAX))?;
    let n = lt.graph().num_nodes();
    let width = seeds.num_labels() + 1;
    let counts = accumulate(
        samples,
        n * width,
        || (),
        |_, i, counts| {
            let mut rng = instance_rng(master_seed, i as u64);
            let out = run_lt_instance(lt, seeds, penalties, &mut rng).expect("inputs checked");
            tally(&out, width, counts);
        },
    );
    Ok(PredictionMatrix::from_counts(n, seeds.num_labels(), &counts, samples))
}
