//! Edge activation and incubation sampling, prior penalties, and the
//! linear-threshold live-edge sampler.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, EdgeId, Label, NodeId, PriorMatrix, NULL_LABEL};

/// How the incubation parameter θ is read by the exponential delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpParam {
    /// `Exp(rate = θ)`, mean `1/θ`.
    #[default]
    Rate,
    /// `Exp(scale = θ)`, mean `θ`.
    Scale,
}

/// The mixture `D(p, θ)`: with probability `p` an edge fires after a finite
/// delay, otherwise it never fires (`+∞`).
#[derive(Debug, Clone, PartialEq)]
pub enum DelayModel {
    /// Discrete independent cascade: delay 1 or `+∞`.
    IcUnit,
    /// Continuous-time cascade with exponential incubation.
    Ctic(ExpParam),
    /// Fixed delays and tie keys, for reproducing one instance exactly.
    Replay(ReplayTable),
}

impl DelayModel {
    pub fn ctic() -> Self {
        DelayModel::Ctic(ExpParam::Rate)
    }

    /// Draws the delay of edge `e`.
    pub fn sample_delay<R: Rng + ?Sized>(&self, g: &DirectedGraph, e: EdgeId, rng: &mut R) -> f64 {
        match self {
            DelayModel::IcUnit => {
                if fires(g.prob(e), rng) {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            DelayModel::Ctic(param) => {
                if !fires(g.prob(e), rng) {
                    return f64::INFINITY;
                }
                let theta = g.theta(e);
                let rate = match param {
                    ExpParam::Rate => theta,
                    ExpParam::Scale => 1.0 / theta,
                };
                let exp = Exp::new(rate).expect("theta validated positive");
                loop {
                    let d: f64 = exp.sample(rng);
                    if d > 0.0 {
                        return d;
                    }
                }
            }
            DelayModel::Replay(table) => table.delays[e],
        }
    }

    /// Priority among equal-distance queue entries; smaller pops first.
    pub fn tie_key<R: Rng + ?Sized>(&self, v: NodeId, rng: &mut R) -> u64 {
        match self {
            DelayModel::Replay(table) => table.tie_keys[v],
            _ => rng.random(),
        }
    }

    /// True when every finite delay this model can produce equals 1.
    pub fn is_discrete(&self) -> bool {
        match self {
            DelayModel::IcUnit => true,
            DelayModel::Ctic(_) => false,
            DelayModel::Replay(t) => t.delays.iter().all(|&d| d == 1.0 || d == f64::INFINITY),
        }
    }

    pub(crate) fn check(&self, g: &DirectedGraph) -> Result<()> {
        match self {
            DelayModel::Replay(t) => t.check(g),
            _ => g.require_params(),
        }
    }
}

fn fires<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.random::<f64>() < p
    }
}

/// Pre-drawn per-edge delays and per-node tie keys for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTable {
    delays: Vec<f64>,
    tie_keys: Vec<u64>,
}

impl ReplayTable {
    pub fn new(delays: Vec<f64>, tie_keys: Vec<u64>) -> Result<Self> {
        if let Some(&d) = delays.iter().find(|&&d| !(d > 0.0)) {
            return Err(Error::InvalidDelay(d));
        }
        Ok(Self { delays, tie_keys })
    }

    /// Draws a full table from `model` (which must not itself be a replay).
    pub fn sample<R: Rng + ?Sized>(model: &DelayModel, g: &DirectedGraph, rng: &mut R) -> Self {
        let delays = (0..g.num_edges()).map(|e| model.sample_delay(g, e, rng)).collect();
        let tie_keys = (0..g.num_nodes()).map(|_| rng.random()).collect();
        Self { delays, tie_keys }
    }

    /// Edge delays equal to the graph weights, all ties broken by node index.
    pub fn from_weights(g: &DirectedGraph) -> Result<Self> {
        let delays = (0..g.num_edges()).map(|e| g.weight(e)).collect();
        Self::new(delays, (0..g.num_nodes() as u64).collect())
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn tie_keys(&self) -> &[u64] {
        &self.tie_keys
    }

    fn check(&self, g: &DirectedGraph) -> Result<()> {
        if self.delays.len() != g.num_edges() {
            return Err(Error::ReplayShape { got: self.delays.len(), expected: g.num_edges() });
        }
        if self.tie_keys.len() != g.num_nodes() {
            return Err(Error::ReplayShape { got: self.tie_keys.len(), expected: g.num_nodes() });
        }
        Ok(())
    }
}

/// Monotone decreasing map from a prior in `(0, 1]` to a penalty `≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PenaltyLink {
    /// `q(ρ) = −log ρ`
    #[default]
    NegLog,
    /// `q(ρ) = 1 − ρ`
    OneMinus,
}

impl PenaltyLink {
    pub fn apply(self, rho: f64) -> f64 {
        match self {
            PenaltyLink::NegLog => {
                if rho >= 1.0 {
                    0.0
                } else {
                    -rho.ln()
                }
            }
            PenaltyLink::OneMinus => 1.0 - rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySource {
    priors: PriorMatrix,
    link: PenaltyLink,
}

impl PenaltySource {
    pub fn new(priors: PriorMatrix, link: PenaltyLink) -> Self {
        Self { priors, link }
    }

    pub fn priors(&self) -> &PriorMatrix {
        &self.priors
    }

    /// Extra delay for label `label` entering node `v`. A zero prior yields `+∞`.
    pub fn penalty(&self, v: NodeId, label: Label) -> f64 {
        debug_assert_ne!(label, NULL_LABEL);
        let rho = self.priors.get(v, label);
        if rho == 0.0 {
            return f64::INFINITY;
        }
        self.link.apply(rho)
    }

    /// Multiplicative weight factor `exp(−q)` used by threshold dynamics.
    pub fn multiplier(&self, v: NodeId, label: Label) -> f64 {
        (-self.penalty(v, label)).exp()
    }
}

/// A graph whose incoming weights per node sum to at most 1, read as
/// linear-threshold influence weights.
#[derive(Debug, Clone)]
pub struct LtGraph {
    graph: DirectedGraph,
}

impl LtGraph {
    pub fn new(graph: DirectedGraph) -> Result<Self> {
        for v in 0..graph.num_nodes() {
            let sum: f64 = graph.in_edges(v).iter().map(|&e| graph.weight(e)).sum();
            if sum > 1.0 + 1e-12 {
                return Err(Error::IncomingWeightTooLarge { node: v, sum });
            }
        }
        Ok(Self { graph })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    /// Probability that no in-edge of `v` is chosen.
    pub fn residual(&self, v: NodeId) -> f64 {
        let sum: f64 = self.graph.in_edges(v).iter().map(|&e| self.graph.weight(e)).sum();
        (1.0 - sum).max(0.0)
    }

    /// For each node, independently picks at most one incoming edge with
    /// probability equal to its weight.
    pub fn sample_active_set<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Option<EdgeId>> {
        (0..self.graph.num_nodes())
            .map(|v| {
                let x: f64 = rng.random();
                let mut acc = 0.0;
                for &e in self.graph.in_edges(v) {
                    acc += self.graph.weight(e);
                    if x < acc {
                        return Some(e);
                    }
                }
                None
            })
            .collect()
    }

    /// Replay table in which exactly the chosen edges fire after unit delay.
    pub fn active_set_replay<R: Rng + ?Sized>(&self, rng: &mut R) -> ReplayTable {
        let chosen = self.sample_active_set(rng);
        let mut delays = vec![f64::INFINITY; self.graph.num_edges()];
        for e in chosen.into_iter().flatten() {
            delays[e] = 1.0;
        }
        let tie_keys = (0..self.graph.num_nodes()).map(|_| rng.random()).collect();
        ReplayTable { delays, tie_keys }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn edge(p: f64, theta: f64) -> DirectedGraph {
        DirectedGraph::new(2, &[(0, 1, 1.0)])
            .unwrap()
            .with_edge_params(vec![p], vec![theta])
            .unwrap()
    }

    #[test]
    fn zero_probability_never_fires() {
        let g = edge(0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for model in [DelayModel::IcUnit, DelayModel::ctic()] {
            for _ in 0..1000 {
                assert_eq!(model.sample_delay(&g, 0, &mut rng), f64::INFINITY);
            }
        }
    }

    #[test]
    fn ic_unit_values() {
        let g = edge(1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            assert_eq!(DelayModel::IcUnit.sample_delay(&g, 0, &mut rng), 1.0);
        }
        let g = edge(0.3, 1.0);
        for _ in 0..1000 {
            let d = DelayModel::IcUnit.sample_delay(&g, 0, &mut rng);
            assert!(d == 1.0 || d == f64::INFINITY);
        }
    }

    #[test]
    fn ctic_mixture_moments() {
        let theta = 0.25;
        let g = edge(0.5, theta);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| DelayModel::ctic().sample_delay(&g, 0, &mut rng))
            .collect();
        let finite: Vec<f64> = draws.iter().copied().filter(|d| d.is_finite()).collect();
        let frac = finite.len() as f64 / draws.len() as f64;
        assert!((frac - 0.5).abs() < 0.01, "finite fraction {frac}");
        assert!(finite.iter().all(|&d| d > 0.0));
        let mean = finite.iter().sum::<f64>() / finite.len() as f64;
        assert!((mean - 1.0 / theta).abs() < 0.02 / theta, "mean {mean}");

        let scaled: Vec<f64> = (0..100_000)
            .map(|_| DelayModel::Ctic(ExpParam::Scale).sample_delay(&edge(1.0, theta), 0, &mut rng))
            .collect();
        let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
        assert!((mean - theta).abs() < 0.02 * theta, "scale mean {mean}");
    }

    #[test]
    fn replay_returns_table() {
        let g = edge(0.5, 1.0);
        let t = ReplayTable::new(vec![2.5], vec![7, 3]).unwrap();
        let model = DelayModel::Replay(t);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(model.sample_delay(&g, 0, &mut rng), 2.5);
        assert_eq!(model.tie_key(1, &mut rng), 3);
        assert!(ReplayTable::new(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn penalty_link() {
        let mut priors = PriorMatrix::ones(2, 2);
        priors.set(0, 1, (-1.0f64).exp()).unwrap();
        priors.set(0, 2, 0.5).unwrap();
        priors.set(1, 1, 0.0).unwrap();
        let src = PenaltySource::new(priors, PenaltyLink::NegLog);
        assert_eq!(src.penalty(1, 2), 0.0);
        assert!((src.penalty(0, 1) - 1.0).abs() < 1e-15);
        assert!((src.penalty(0, 2) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(src.penalty(1, 1), f64::INFINITY);
        assert_eq!(src.multiplier(1, 1), 0.0);
        assert!((src.multiplier(0, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn links_are_decreasing() {
        for link in [PenaltyLink::NegLog, PenaltyLink::OneMinus] {
            assert_eq!(link.apply(1.0), 0.0);
            let mut prev = f64::INFINITY;
            for i in 1..=100 {
                let q = link.apply(i as f64 / 100.0);
                assert!(q.is_finite() && q < prev);
                prev = q;
            }
        }
    }

    #[test]
    fn lt_rejects_heavy_inputs() {
        let g = DirectedGraph::new(3, &[(0, 2, 0.6), (1, 2, 0.5)]).unwrap();
        assert!(matches!(LtGraph::new(g), Err(Error::IncomingWeightTooLarge { node: 2, .. })));
    }

    #[test]
    fn lt_sampling() {
        let g = DirectedGraph::new(5, &[(0, 1, 1.0), (0, 2, 0.3), (3, 2, 0.2)]).unwrap();
        let lt = LtGraph::new(g).unwrap();
        assert!((lt.residual(2) - 0.5).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 100_000;
        let mut none = 0;
        for _ in 0..draws {
            let active = lt.sample_active_set(&mut rng);
            assert_eq!(active[1], Some(0));
            assert_eq!(active[0], None);
            assert_eq!(active[4], None);
            if active[2].is_none() {
                none += 1;
            }
        }
        let frac = none as f64 / draws as f64;
        assert!((frac - 0.5).abs() < 0.01, "none fraction {frac}");
    }
}
