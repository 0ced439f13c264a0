//! Prediction metrics, the planted-community generator and the repeated
//! random-seed experiment protocol.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{labelprop, shortpaths, LabelPropConfig};
use crate::dynamics::{DelayModel, ExpParam, PenaltyLink, PenaltySource};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, Label, NodeId, PredictionMatrix, PriorMatrix, SeedSet};
use crate::matrix::DenseMatrix;
use crate::propagation::{basic_infprop, hard_labels, infprop, instance_rng, required_samples};

/// How the squared error is defined in every report.
pub const MSE_DEFINITION: &str = "mean over evaluated nodes of sum over labels 1..L of (f - onehot)^2; null column excluded";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Mse,
    Auc,
    Top1,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Accuracy, Metric::Mse, Metric::Auc, Metric::Top1];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Mse => "mse",
            Metric::Auc => "auc",
            Metric::Top1 => "top1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub mse: f64,
    /// Macro one-vs-rest ROC AUC over labels that have both positive and
    /// negative evaluated nodes; `None` if no label qualifies.
    pub auc: Option<f64>,
    /// Fraction of nodes whose top-scored label is correct. Rows without
    /// label mass count as misses here, unlike `accuracy`.
    pub top1: f64,
}

impl Metrics {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Accuracy => Some(self.accuracy),
            Metric::Mse => Some(self.mse),
            Metric::Auc => self.auc,
            Metric::Top1 => Some(self.top1),
        }
    }
}

/// ROC AUC of `scores` against binary `positive`, with ties given average
/// ranks. `None` when either class is empty.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let pos = positive.iter().filter(|&&p| p).count();
    let neg = positive.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let rank = (i + j + 2) as f64 / 2.0;
        rank_sum += rank * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let pos = pos as f64;
    Some((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg as f64))
}

fn top_label(row: &[f64]) -> Option<Label> {
    let mut best = None;
    for l in 1..row.len() {
        if row[l] > 0.0 && best.is_none_or(|b: usize| row[l] > row[b]) {
            best = Some(l);
        }
    }
    best.map(|l| l as Label)
}

/// Multiclass metrics of `f` on the nodes in `eval`. Hard labels use
/// `fallback` for rows with no label mass.
pub fn metrics(f: &PredictionMatrix, truth: &[Label], eval: &[NodeId], fallback: Label) -> Result<Metrics> {
    if eval.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    if truth.len() != f.num_nodes() {
        return Err(Error::ShapeMismatch(format!("{} labels for {} nodes", truth.len(), f.num_nodes())));
    }
    let num_labels = f.num_labels();
    if let Some(&label) = truth.iter().find(|&&l| l == 0 || l as usize > num_labels) {
        return Err(Error::LabelOutOfRange { label, num_labels });
    }
    let hard = hard_labels(f, fallback);
    let count = eval.len() as f64;
    let mut correct = 0usize;
    let mut top = 0usize;
    let mut sq = 0.0;
    for &v in eval {
        let row = f.row(v);
        correct += usize::from(hard[v] == truth[v]);
        top += usize::from(top_label(row) == Some(truth[v]));
        for (l, &x) in row.iter().enumerate().skip(1) {
            let target = if l as Label == truth[v] { 1.0 } else { 0.0 };
            sq += (x - target) * (x - target);
        }
    }
    let mut aucs = Vec::new();
    let mut scores = vec![0.0; eval.len()];
    let mut positive = vec![false; eval.len()];
    for l in 1..=num_labels as Label {
        for (i, &v) in eval.iter().enumerate() {
            scores[i] = f.get(v, l);
            positive[i] = truth[v] == l;
        }
        aucs.extend(roc_auc(&scores, &positive));
    }
    Ok(Metrics {
        accuracy: correct as f64 / count,
        mse: sq / count,
        auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        top1: top as f64 / count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultilabelMetrics {
    pub auc: Option<f64>,
    pub top1: f64,
}

/// Ranking metrics for an `n × L` score matrix against label sets.
/// `top1` counts nodes whose highest-scored label (smallest index on ties)
/// is one of theirs.
pub fn multilabel_metrics(scores: &DenseMatrix, truth: &[Vec<bool>], eval: &[NodeId]) -> Result<MultilabelMetrics> {
    if eval.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let num_labels = scores.cols();
    if truth.len() != scores.rows() || truth.iter().any(|t| t.len() != num_labels) {
        return Err(Error::ShapeMismatch("label sets do not match score matrix".into()));
    }
    let mut top = 0usize;
    for &v in eval {
        let row = scores.row(v);
        let best = (0..num_labels).fold(0, |b, l| if row[l] > row[b] { l } else { b });
        top += usize::from(num_labels > 0 && truth[v][best]);
    }
    let mut aucs = Vec::new();
    for l in 0..num_labels {
        let s: Vec<f64> = eval.iter().map(|&v| scores[(v, l)]).collect();
        let p: Vec<bool> = eval.iter().map(|&v| truth[v][l]).collect();
        aucs.extend(roc_auc(&s, &p));
    }
    Ok(MultilabelMetrics {
        auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        top1: top as f64 / eval.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub communities: usize,
    pub size: usize,
    /// Members of each community that also join one other community.
    pub overlap: usize,
    /// Edge probability between nodes sharing no community.
    pub noise: f64,
    /// Edge probability between nodes sharing a community.
    pub intra: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { communities: 3, size: 64, overlap: 8, noise: 0.05, intra: 0.3 }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.communities == 0 || self.size == 0 {
            return Err(Error::Config("communities and size must be positive".into()));
        }
        if self.overlap > self.size {
            return Err(Error::Config(format!("overlap {} exceeds community size {}", self.overlap, self.size)));
        }
        if self.overlap > 0 && self.communities < 2 {
            return Err(Error::Config("overlap needs at least two communities".into()));
        }
        for p in [self.noise, self.intra] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability(p));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthGraph {
    /// Unit-weight arcs in both directions; no edge parameters set.
    pub graph: DirectedGraph,
    /// Primary community of each node, as labels `1..=C`.
    pub labels: Vec<Label>,
    /// Sorted community indices (0-based) each node belongs to.
    pub memberships: Vec<Vec<usize>>,
}

/// Random graph with `C` planted communities of equal size.
pub fn synth_community<R: Rng + ?Sized>(params: &SynthParams, rng: &mut R) -> Result<SynthGraph> {
    params.validate()?;
    let c = params.communities;
    let n = c * params.size;
    let perm = sample_indices(rng, n, n).into_vec();
    let mut labels = vec![0; n];
    let mut memberships = vec![Vec::new(); n];
    for (i, &v) in perm.iter().enumerate() {
        labels[v] = (i / params.size) as Label + 1;
        memberships[v].push(i / params.size);
    }
    for k in 0..c {
        let members = &perm[k * params.size..(k + 1) * params.size];
        for i in sample_indices(rng, params.size, params.overlap) {
            let other = (k + 1 + rng.random_range(0..c - 1)) % c;
            memberships[members[i]].push(other);
        }
    }
    for m in &mut memberships {
        m.sort_unstable();
    }
    let shares = |u: usize, v: usize| memberships[u].iter().any(|k| memberships[v].contains(k));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if shares(u, v) { params.intra } else { params.noise };
            if rng.random_bool(p) {
                edges.push((u, v, 1.0));
            }
        }
    }
    Ok(SynthGraph { graph: DirectedGraph::undirected(n, &edges)?, labels, memberships })
}

/// Uniform random directed graph with `m` distinct unit-weight arcs and no
/// self-loops.
pub fn random_digraph<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<DirectedGraph> {
    let pairs = n * n.saturating_sub(1);
    if m > pairs {
        return Err(Error::Config(format!("{m} arcs do not fit in {n} nodes")));
    }
    let edges: Vec<_> = sample_indices(rng, pairs, m)
        .into_iter()
        .map(|i| {
            let (u, j) = (i / (n - 1), i % (n - 1));
            (u, if j >= u { j + 1 } else { j }, 1.0)
        })
        .collect();
    DirectedGraph::new(n, &edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Labelprop,
    Shortpaths,
    Infprop,
    Basic,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "labelprop" => Ok(Method::Labelprop),
            "shortpaths" => Ok(Method::Shortpaths),
            "infprop" => Ok(Method::Infprop),
            "basic" => Ok(Method::Basic),
            _ => Err(Error::Config(format!("unknown method '{s}'"))),
        }
    }
}

/// Delay model by name, for configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Ctic,
    CticScale,
    Ic,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ctic" => Ok(ModelKind::Ctic),
            "ctic-scale" | "ctic_scale" => Ok(ModelKind::CticScale),
            "ic" => Ok(ModelKind::Ic),
            _ => Err(Error::Config(format!("unknown model '{s}'"))),
        }
    }
}

impl ModelKind {
    pub fn delay_model(self) -> DelayModel {
        match self {
            ModelKind::Ctic => DelayModel::Ctic(ExpParam::Rate),
            ModelKind::CticScale => DelayModel::Ctic(ExpParam::Scale),
            ModelKind::Ic => DelayModel::IcUnit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedBudget {
    /// `round(fraction · n)` nodes, at least one.
    Fraction(f64),
    Count(usize),
    /// This many nodes drawn from each label class.
    PerClass(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleCount {
    Fixed(usize),
    /// Enough instances for `max |f̂ − f| ≤ eps` with probability `1 − delta`.
    Bound { eps: f64, delta: f64 },
}

impl SampleCount {
    pub fn resolve(self, n: usize, num_labels: usize) -> Result<usize> {
        match self {
            SampleCount::Fixed(0) => Err(Error::ZeroSamples),
            SampleCount::Fixed(k) => Ok(k),
            SampleCount::Bound { eps, delta } => required_samples(eps, delta, n, num_labels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub seeds: SeedBudget,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_samples")]
    pub samples: SampleCount,
    /// Activation probability on every edge, with `θ = 1/out-degree`.
    /// `None` keeps parameters already attached to the graph.
    #[serde(default = "default_p")]
    pub p_global: Option<f64>,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub labelprop: LabelPropConfig,
    /// Instance counts at which repetition 0 is re-scored, for convergence
    /// curves. Ignored by the deterministic methods.
    #[serde(default)]
    pub curve_samples: Vec<usize>,
    /// Wall-clock timings make reports differ between runs, so they are off
    /// unless asked for.
    #[serde(default)]
    pub timing: bool,
}

fn default_repetitions() -> usize {
    10
}
fn default_samples() -> SampleCount {
    SampleCount::Fixed(1000)
}
fn default_p() -> Option<f64> {
    Some(1.0)
}
fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

impl ExperimentConfig {
    pub fn new(method: Method, seeds: SeedBudget) -> Self {
        Self {
            method,
            seeds,
            repetitions: default_repetitions(),
            samples: default_samples(),
            p_global: default_p(),
            model: ModelKind::default(),
            master_seed: 0,
            metrics: default_metrics(),
            labelprop: LabelPropConfig::default(),
            curve_samples: Vec::new(),
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("metric list is empty".into()));
        }
        match self.seeds {
            SeedBudget::Fraction(x) if !(x > 0.0 && x < 1.0) => {
                Err(Error::Config(format!("seed fraction {x} outside (0, 1)")))
            }
            SeedBudget::Count(0) | SeedBudget::PerClass(0) => Err(Error::Config("seed budget is zero".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub index: usize,
    pub seeds: Vec<NodeId>,
    pub evaluated: usize,
    pub metrics: BTreeMap<Metric, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    /// Repetitions in which the metric was defined.
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let count = values.len();
        if count == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let std = if count > 1 {
            (values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, count })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub samples: usize,
    pub metrics: BTreeMap<Metric, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub num_nodes: usize,
    pub num_labels: usize,
    /// Instances per repetition; 0 for deterministic methods.
    pub samples: usize,
    pub mse_definition: String,
    pub repetitions: Vec<Repetition>,
    pub summary: BTreeMap<Metric, Summary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curve: Vec<CurvePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// One row per repetition, then `mean` and `std` rows.
    pub fn repetitions_tsv(&self) -> String {
        let metrics = &self.config.metrics;
        let mut out = String::from("repetition");
        for m in metrics {
            write!(out, "\t{}", m.name()).unwrap();
        }
        out.push('\n');
        let cell = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |x| x.to_string());
        for r in &self.repetitions {
            write!(out, "{}", r.index).unwrap();
            for m in metrics {
                write!(out, "\t{}", cell(r.metrics.get(m).copied())).unwrap();
            }
            out.push('\n');
        }
        for (name, pick) in [("mean", 0), ("std", 1)] {
            out.push_str(name);
            for m in metrics {
                let s = self.summary.get(m).map(|s| if pick == 0 { s.mean } else { s.std });
                write!(out, "\t{}", cell(s)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Metrics of repetition 0 against the instance count.
    pub fn curve_tsv(&self) -> String {
        let metrics = &self.config.metrics;
        let mut out = String::from("samples");
        for m in metrics {
            write!(out, "\t{}", m.name()).unwrap();
        }
        out.push('\n');
        for p in &self.curve {
            write!(out, "{}", p.samples).unwrap();
            for m in metrics {
                write!(out, "\t{}", p.metrics.get(m).map_or_else(|| "NA".to_string(), |x| x.to_string())).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Draws a seed set per the budget. Nodes are uniform over the whole graph
/// except under [`SeedBudget::PerClass`].
pub fn sample_seeds<R: Rng + ?Sized>(
    budget: SeedBudget,
    truth: &[Label],
    num_labels: usize,
    rng: &mut R,
) -> Result<SeedSet> {
    let n = truth.len();
    let nodes: Vec<NodeId> = match budget {
        SeedBudget::Fraction(x) => {
            let k = ((x * n as f64).round() as usize).max(1);
            check_seed_count(k, n)?;
            sample_indices(rng, n, k).into_vec()
        }
        SeedBudget::Count(k) => {
            check_seed_count(k, n)?;
            sample_indices(rng, n, k).into_vec()
        }
        SeedBudget::PerClass(k) => {
            let mut chosen = Vec::new();
            for l in 1..=num_labels as Label {
                let class: Vec<NodeId> = (0..n).filter(|&v| truth[v] == l).collect();
                if class.len() < k {
                    return Err(Error::Config(format!("class {l} has {} nodes, fewer than {k}", class.len())));
                }
                chosen.extend(sample_indices(rng, class.len(), k).into_iter().map(|i| class[i]));
            }
            check_seed_count(chosen.len(), n)?;
            chosen
        }
    };
    SeedSet::new(nodes.into_iter().map(|v| (v, truth[v])).collect(), num_labels, n)
}

fn check_seed_count(k: usize, n: usize) -> Result<()> {
    if k >= n {
        return Err(Error::Config(format!("seed count {k} leaves no node to evaluate among {n}")));
    }
    Ok(())
}

/// Runs one method on one seed set.
#[allow(clippy::too_many_arguments)]
pub fn predict(
    method: Method,
    g: &DirectedGraph,
    seeds: &SeedSet,
    model: &DelayModel,
    penalties: Option<&PenaltySource>,
    samples: usize,
    master_seed: u64,
    lp: &LabelPropConfig,
) -> Result<PredictionMatrix> {
    if penalties.is_some() && method != Method::Infprop {
        return Err(Error::Config(format!("priors are only supported by infprop, not {method:?}")));
    }
    match method {
        Method::Labelprop => Ok(labelprop(g, seeds, lp)?.prediction),
        Method::Shortpaths => shortpaths(g, seeds),
        Method::Infprop => infprop(g, seeds, model, penalties, samples, master_seed),
        Method::Basic => basic_infprop(g, seeds, model, samples, master_seed),
    }
}

fn select(m: &Metrics, wanted: &[Metric]) -> BTreeMap<Metric, f64> {
    wanted.iter().filter_map(|&k| m.get(k).map(|x| (k, x))).collect()
}

/// Repeated random-seed evaluation. Repetition `r` draws its seeds and its
/// instance streams from `(master_seed, r)`, so results do not depend on
/// scheduling.
pub fn run_experiment(
    config: &ExperimentConfig,
    graph: &DirectedGraph,
    truth: &[Label],
    priors: Option<&PriorMatrix>,
) -> Result<Report> {
    config.validate()?;
    // the clock is only read when asked for; it is unavailable on some targets
    let start = config.timing.then(Instant::now);
    let n = graph.num_nodes();
    if truth.len() != n {
        return Err(Error::ShapeMismatch(format!("{} labels for {n} nodes", truth.len())));
    }
    if truth.contains(&0) {
        return Err(Error::Config("every node needs a true label in 1..L".into()));
    }
    let num_labels = truth.iter().copied().max().unwrap_or(0) as usize;
    let owned;
    let g = match config.p_global {
        Some(p) => {
            owned = graph.clone().with_default_params(p)?;
            &owned
        }
        None => graph,
    };
    let model = config.model.delay_model();
    let penalties = match priors {
        Some(p) if p.num_nodes() != n || p.num_labels() != num_labels => {
            return Err(Error::ShapeMismatch(format!(
                "priors are {}x{}, graph has {n} nodes and {num_labels} labels",
                p.num_nodes(),
                p.num_labels()
            )))
        }
        Some(p) => Some(PenaltySource::new(p.clone(), PenaltyLink::NegLog)),
        None => None,
    };
    let stochastic = matches!(config.method, Method::Infprop | Method::Basic);
    let samples = if stochastic { config.samples.resolve(n, num_labels)? } else { 0 };

    let run = |r: usize| -> Result<(Repetition, Option<Vec<CurvePoint>>)> {
        let t = config.timing.then(Instant::now);
        let mut rng = instance_rng(config.master_seed, r as u64);
        let seeds = sample_seeds(config.seeds, truth, num_labels, &mut rng)?;
        let stream: u64 = rng.random();
        let mask = seeds.mask(n);
        let eval: Vec<NodeId> = (0..n).filter(|&v| !mask[v]).collect();
        let fallback = seeds.majority_label();
        let score = |samples: usize| -> Result<BTreeMap<Metric, f64>> {
            let f = predict(config.method, g, &seeds, &model, penalties.as_ref(), samples, stream, &config.labelprop)?;
            Ok(select(&metrics(&f, truth, &eval, fallback)?, &config.metrics))
        };
        let values = score(samples)?;
        let curve = if r == 0 && stochastic && !config.curve_samples.is_empty() {
            let points = config
                .curve_samples
                .iter()
                .map(|&s| Ok(CurvePoint { samples: s, metrics: score(s)? }))
                .collect::<Result<Vec<_>>>()?;
            Some(points)
        } else {
            None
        };
        let rep = Repetition {
            index: r,
            seeds: seeds.nodes().collect(),
            evaluated: eval.len(),
            metrics: values,
            seconds: t.map(|t| t.elapsed().as_secs_f64()),
        };
        Ok((rep, curve))
    };

    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        (0..config.repetitions).into_par_iter().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = (0..config.repetitions).map(run).collect::<Result<_>>()?;

    let mut repetitions = Vec::with_capacity(results.len());
    let mut curve = Vec::new();
    for (rep, c) in results {
        if let Some(c) = c {
            curve = c;
        }
        repetitions.push(rep);
    }
    let summary = config
        .metrics
        .iter()
        .filter_map(|&m| {
            let values: Vec<f64> = repetitions.iter().filter_map(|r| r.metrics.get(&m).copied()).collect();
            Summary::of(&values).map(|s| (m, s))
        })
        .collect();
    Ok(Report {
        config: config.clone(),
        num_nodes: n,
        num_labels,
        samples,
        mse_definition: MSE_DEFINITION.to_string(),
        repetitions,
        summary,
        curve,
        seconds: start.map(|t| t.elapsed().as_secs_f64()),
    })
}
