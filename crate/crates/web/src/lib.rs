//! WebAssembly entry points for the demo page. Each export takes plain
//! numbers and returns a JSON string; the native functions behind them are
//! public so they can be tested without a browser.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use infprop::active::{evaluate_order, greedy_select, hideg_select, random_select, MonteCarloInfluence};
use infprop::baselines::{labelprop, shortpaths, LabelPropConfig};
use infprop::eval::{metrics, random_digraph, sample_seeds, synth_community, SeedBudget, SynthParams};
use infprop::oracle::exact_f;
use infprop::propagation::required_samples_exact;
use infprop::{hard_labels, infprop as run_infprop, instance_rng, DelayModel, Label, PredictionMatrix, Result, SeedSet};

#[derive(Debug, Serialize)]
pub struct MethodResult {
    pub name: &'static str,
    pub accuracy: f64,
    /// Hard label per node.
    pub predicted: Vec<Label>,
    /// Largest label probability per node.
    pub confidence: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub truth: Vec<Label>,
    pub seeds: Vec<usize>,
    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub edges: Vec<(usize, usize)>,
    pub methods: Vec<MethodResult>,
}

fn summarize(name: &'static str, f: &PredictionMatrix, truth: &[Label], seeds: &SeedSet) -> Result<MethodResult> {
    let mask = seeds.mask(truth.len());
    let eval: Vec<usize> = (0..truth.len()).filter(|&v| !mask[v]).collect();
    let fallback = seeds.majority_label();
    let confidence = (0..f.num_nodes()).map(|v| f.row(v)[1..].iter().copied().fold(0.0, f64::max)).collect();
    Ok(MethodResult {
        name,
        accuracy: metrics(f, truth, &eval, fallback)?.accuracy,
        predicted: hard_labels(f, fallback),
        confidence,
    })
}

/// One planted-community instance with one seed per community, labeled by
/// infprop, label propagation and shortest paths.
pub fn compare(params: &SynthParams, p: f64, samples: usize, seed: u64) -> Result<Comparison> {
    let mut rng = instance_rng(seed, 0);
    let s = synth_community(params, &mut rng)?;
    let seeds = sample_seeds(SeedBudget::PerClass(1), &s.labels, params.communities, &mut rng)?;
    let g = s.graph.with_default_params(p)?;
    let f_inf = run_infprop(&g, &seeds, &DelayModel::ctic(), None, samples, seed)?;
    let f_lp = labelprop(&g, &seeds, &LabelPropConfig::default())?.prediction;
    let f_sp = shortpaths(&g, &seeds)?;
    Ok(Comparison {
        seeds: seeds.nodes().collect(),
        edges: g.edges().filter(|e| e.0 < e.1).map(|e| (e.0, e.1)).collect(),
        methods: vec![
            summarize("infprop", &f_inf, &s.labels, &seeds)?,
            summarize("labelprop", &f_lp, &s.labels, &seeds)?,
            summarize("shortpaths", &f_sp, &s.labels, &seeds)?,
        ],
        truth: s.labels,
    })
}

#[derive(Debug, Serialize)]
pub struct ConvergencePoint {
    pub samples: usize,
    /// Largest entrywise error against the exact probabilities.
    pub max_error: f64,
    /// Error level guaranteed with probability 0.95 at this sample count.
    pub bound: f64,
}

/// Estimation error against the exact oracle on a random 8-node, 12-arc
/// graph seeded at its two highest out-degree nodes, for growing instance
/// counts.
pub fn convergence(p: f64, seed: u64, counts: &[usize]) -> Result<Vec<ConvergencePoint>> {
    let mut rng = instance_rng(seed, 0);
    let g = random_digraph(8, 12, &mut rng)?.with_default_params(p)?;
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(g.out_degree(v)));
    let seeds = SeedSet::new(vec![(order[0], 1), (order[1], 2)], 2, 8)?;
    let exact = exact_f(&g, &seeds)?;
    counts
        .iter()
        .map(|&n| {
            let f = run_infprop(&g, &seeds, &DelayModel::IcUnit, None, n, seed)?;
            let bound = (required_samples_exact(1.0, 0.05, 8, 2) / n as f64).sqrt();
            Ok(ConvergencePoint { samples: n, max_error: f.max_abs_diff(&exact), bound })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct GainCurve {
    pub name: &'static str,
    pub chosen: Vec<usize>,
    /// Expected number of infected nodes after each pick.
    pub influence: Vec<f64>,
}

/// Cumulative influence of greedy, highest-degree and random seed picks on
/// a planted-community graph.
pub fn gain_curves(params: &SynthParams, p: f64, k: usize, samples: usize, seed: u64) -> Result<Vec<GainCurve>> {
    let s = synth_community(params, &mut instance_rng(seed, 0))?;
    let g = s.graph.with_default_params(p)?;
    let model = DelayModel::IcUnit;
    let picks = [
        ("greedy", greedy_select(&g, &model, k, samples, seed, None)?),
        ("hideg", hideg_select(&g, k)?),
        ("random", random_select(&g, k, &mut instance_rng(seed, 1))?),
    ];
    picks
        .into_iter()
        .map(|(name, mut result)| {
            // score every curve on the same instances
            let mut objective = MonteCarloInfluence::new(&g, &model, samples, seed ^ 0x5eed)?;
            evaluate_order(&mut objective, &mut result);
            let influence = result
                .marginal_gains
                .iter()
                .scan(0.0, |acc, g| {
                    *acc += g;
                    Some(*acc)
                })
                .collect();
            Ok(GainCurve { name, chosen: result.chosen, influence })
        })
        .collect()
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.map(|v| serde_json::to_string(&v).expect("serializable")).map_err(|e| JsValue::from_str(&e.to_string()))
}

fn synth_params(size: usize, overlap: usize, noise: f64, intra: f64) -> SynthParams {
    SynthParams { communities: 3, size, overlap, noise, intra }
}

#[wasm_bindgen(js_name = compareMethods)]
pub fn compare_methods(
    size: usize,
    overlap: usize,
    noise: f64,
    intra: f64,
    p: f64,
    samples: usize,
    seed: u32,
) -> std::result::Result<String, JsValue> {
    to_js(compare(&synth_params(size, overlap, noise, intra), p, samples, seed.into()))
}

#[wasm_bindgen(js_name = convergenceCurve)]
pub fn convergence_curve(p: f64, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(convergence(p, seed.into(), &[10, 30, 100, 300, 1000, 3000, 10_000]))
}

#[wasm_bindgen(js_name = activeCurves)]
pub fn active_curves(
    size: usize,
    noise: f64,
    p: f64,
    k: usize,
    samples: usize,
    seed: u32,
) -> std::result::Result<String, JsValue> {
    to_js(gain_curves(&synth_params(size, size / 8, noise, 0.3), p, k, samples, seed.into()))
}
