//! Text formats: whitespace-separated edge, label, prior and seed files,
//! and CSV prediction dumps. Lines starting with `#` and blank lines are
//! skipped everywhere.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, Label, NodeId, PredictionMatrix, PriorMatrix};

/// Node names in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeDict {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl NodeDict {
    pub fn new() -> Self {
        Self::default()
    }

    /// Names `0..n`, matching node indices.
    pub fn numbered(n: usize) -> Self {
        let mut d = Self::new();
        for v in 0..n {
            d.intern(&v.to_string());
        }
        d
    }

    pub fn intern(&mut self, name: &str) -> NodeId {
        if let Some(&v) = self.index.get(name) {
            return v;
        }
        let v = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), v);
        v
    }

    pub fn get(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        (!line.is_empty() && !line.starts_with('#')).then(|| (i + 1, line.split_whitespace().collect()))
    })
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn number(line: usize, field: &str, what: &str) -> Result<f64> {
    field.parse().map_err(|_| parse_err(line, format!("bad {what} '{field}'")))
}

fn lookup(dict: &NodeDict, line: usize, name: &str) -> Result<NodeId> {
    dict.get(name).ok_or_else(|| parse_err(line, format!("unknown node '{name}'")))
}

/// Parsed edge file. Edge parameters are present only if every line
/// carries both `p` and `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub edges: Vec<(NodeId, NodeId, f64)>,
    pub params: Option<Vec<(f64, f64)>>,
}

/// Parses `u v [w [p θ]]` lines, interning node names into `dict`.
pub fn parse_edges(text: &str, dict: &mut NodeDict) -> Result<EdgeList> {
    let mut edges = Vec::new();
    let mut params = Vec::new();
    let mut arity = None;
    for (line, fields) in data_lines(text) {
        if !matches!(fields.len(), 2 | 3 | 5) {
            return Err(parse_err(line, format!("expected 2, 3 or 5 fields, got {}", fields.len())));
        }
        let with_params = fields.len() == 5;
        if *arity.get_or_insert(with_params) != with_params {
            return Err(parse_err(line, "edge parameters must be given on every line or none"));
        }
        let u = dict.intern(fields[0]);
        let v = dict.intern(fields[1]);
        let w = fields.get(2).map_or(Ok(1.0), |f| number(line, f, "weight"))?;
        edges.push((u, v, w));
        if with_params {
            params.push((number(line, fields[3], "probability")?, number(line, fields[4], "theta")?));
        }
    }
    Ok(EdgeList { edges, params: (arity == Some(true)).then_some(params) })
}

impl EdgeList {
    /// Builds the graph over `n` nodes; `undirected` adds the reverse of
    /// every edge. Per-edge parameters, when present, are attached.
    pub fn build(&self, n: usize, undirected: bool) -> Result<DirectedGraph> {
        let g = if undirected {
            DirectedGraph::undirected(n, &self.edges)?
        } else {
            DirectedGraph::new(n, &self.edges)?
        };
        let Some(params) = &self.params else {
            return Ok(g);
        };
        let mut prob = vec![0.0; g.num_edges()];
        let mut theta = vec![0.0; g.num_edges()];
        for (&(u, v, _), &(p, t)) in self.edges.iter().zip(params) {
            let arcs = if undirected { vec![(u, v), (v, u)] } else { vec![(u, v)] };
            for (a, b) in arcs {
                let e = g.find_edge(a, b).expect("edge was inserted");
                prob[e] = p;
                theta[e] = t;
            }
        }
        g.with_edge_params(prob, theta)
    }
}

/// Writes every arc as `u v w`, or `u v w p θ` when parameters are set.
pub fn write_edges(g: &DirectedGraph, dict: &NodeDict) -> String {
    let mut out = String::new();
    for e in 0..g.num_edges() {
        let (u, v) = (g.source(e), g.target(e));
        write!(out, "{}\t{}\t{}", dict.name(u), dict.name(v), g.weight(e)).unwrap();
        if g.has_params() {
            write!(out, "\t{}\t{}", g.prob(e), g.theta(e)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses `node label` lines. Labels are integers `1..`; `0` is reserved
/// for the null label. A node may appear on several lines (multilabel).
pub fn parse_labels(text: &str, dict: &NodeDict) -> Result<Vec<(NodeId, Label)>> {
    data_lines(text)
        .map(|(line, fields)| {
            if fields.len() != 2 {
                return Err(parse_err(line, format!("expected 2 fields, got {}", fields.len())));
            }
            let v = lookup(dict, line, fields[0])?;
            let label: Label = fields[1]
                .parse()
                .ok()
                .filter(|&l| l > 0)
                .ok_or_else(|| parse_err(line, format!("label '{}' is not a positive integer", fields[1])))?;
            Ok((v, label))
        })
        .collect()
}

/// One label per node; unlisted nodes get the null label. Fails on nodes
/// listed twice.
pub fn single_labels(entries: &[(NodeId, Label)], n: usize) -> Result<Vec<Label>> {
    let mut labels = vec![0; n];
    for &(v, l) in entries {
        if labels[v] != 0 {
            return Err(Error::Config(format!("node {v} has more than one label")));
        }
        labels[v] = l;
    }
    Ok(labels)
}

/// Binary label vectors of width `num_labels`.
pub fn label_sets(entries: &[(NodeId, Label)], n: usize, num_labels: usize) -> Result<Vec<Vec<bool>>> {
    let mut sets = vec![vec![false; num_labels]; n];
    for &(v, l) in entries {
        if l as usize > num_labels {
            return Err(Error::LabelOutOfRange { label: l, num_labels });
        }
        sets[v][l as usize - 1] = true;
    }
    Ok(sets)
}

/// Parses `node ℓ ρ` lines into a prior matrix that defaults to 1.
pub fn parse_priors(text: &str, dict: &NodeDict, num_labels: usize) -> Result<PriorMatrix> {
    let mut priors = PriorMatrix::ones(dict.len(), num_labels);
    for (line, fields) in data_lines(text) {
        if fields.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, got {}", fields.len())));
        }
        let v = lookup(dict, line, fields[0])?;
        let label: Label = fields[1].parse().map_err(|_| parse_err(line, format!("bad label '{}'", fields[1])))?;
        let rho = number(line, fields[2], "prior")?;
        priors.set(v, label, rho).map_err(|e| parse_err(line, e.to_string()))?;
    }
    Ok(priors)
}

/// Parses a seed list: one node per line, optionally followed by a label
/// that overrides the label file.
pub fn parse_seeds(text: &str, dict: &NodeDict) -> Result<Vec<(NodeId, Option<Label>)>> {
    data_lines(text)
        .map(|(line, fields)| {
            if !matches!(fields.len(), 1 | 2) {
                return Err(parse_err(line, format!("expected 1 or 2 fields, got {}", fields.len())));
            }
            let v = lookup(dict, line, fields[0])?;
            let label = match fields.get(1) {
                Some(f) => Some(f.parse().ok().filter(|&l: &Label| l > 0).ok_or_else(|| parse_err(line, "bad label"))?),
                None => None,
            };
            Ok((v, label))
        })
        .collect()
}

/// CSV with header `node,null,label_1,…,label_L`.
pub fn prediction_csv(f: &PredictionMatrix, dict: &NodeDict) -> String {
    let mut out = String::from("node,null");
    for l in 1..=f.num_labels() {
        write!(out, ",label_{l}").unwrap();
    }
    out.push('\n');
    for v in 0..f.num_nodes() {
        out.push_str(dict.name(v));
        for x in f.row(v) {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    out
}
