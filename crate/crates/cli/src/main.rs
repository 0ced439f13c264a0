use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use infprop::active::{evaluate_order, greedy_select, hideg_select, random_select, MonteCarloInfluence};
use infprop::baselines::LabelPropConfig;
use infprop::eval::{predict, run_experiment, synth_community, ExperimentConfig, Method, ModelKind, SynthParams};
use infprop::io::{
    parse_edges, parse_labels, parse_priors, parse_seeds, prediction_csv, single_labels, write_edges, NodeDict,
};
use infprop::oracle::{residual_matrix, solve};
use infprop::{instance_rng, required_samples, DirectedGraph, Label, PenaltyLink, PenaltySource, SeedSet};

const WORKERS_ENV: &str = "INFPROP_WORKERS";

/// A user-input problem; exits with status 2.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "infprop", version, about = "Node labeling by competitive infection dynamics")]
struct Cli {
    /// Seed for every random choice; identical seeds give identical output.
    #[arg(long, global = true)]
    master_seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict label distributions for every node and write them as CSV.
    Predict(PredictArgs),
    /// Run a repeated random-seed experiment described by a JSON config.
    Evaluate(EvaluateArgs),
    /// Choose seed nodes to label by influence maximization.
    Active(ActiveArgs),
    /// Exact label probabilities, infector matrix, bias and residuals on a
    /// small graph.
    OracleCheck(OracleArgs),
    /// Generate a planted-community graph.
    Synth(SynthArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge file: `u v [w [p theta]]` per line.
    #[arg(long)]
    graph: PathBuf,
    /// Add the reverse of every edge.
    #[arg(long)]
    undirected: bool,
    /// Activation probability on every edge (default 1, or the file's
    /// per-edge values when present).
    #[arg(long, conflicts_with = "p_from_weight")]
    p: Option<f64>,
    /// Use each edge weight as its activation probability.
    #[arg(long)]
    p_from_weight: bool,
    /// Incubation model: ctic (rate), ctic-scale or ic.
    #[arg(long, default_value = "ctic")]
    model: ModelKind,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Label file: `node label` per line.
    #[arg(long)]
    labels: PathBuf,
    /// Prior file: `node label rho` per line; infprop only.
    #[arg(long)]
    priors: Option<PathBuf>,
    #[arg(long, default_value = "infprop")]
    method: Method,
    /// Monte-Carlo instances.
    #[arg(long, conflicts_with_all = ["eps", "delta"])]
    n: Option<usize>,
    /// Choose the instance count for max error `eps` with probability
    /// `1 - delta`.
    #[arg(long, requires = "delta")]
    eps: Option<f64>,
    #[arg(long, requires = "eps")]
    delta: Option<f64>,
    /// Seed nodes, one per line with an optional label; defaults to every
    /// labeled node.
    #[arg(long)]
    seed_file: Option<PathBuf>,
    /// Output CSV; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Writes `PREFIX.json`, `PREFIX.tsv` and `PREFIX.curve.tsv`; the JSON
    /// report goes to stdout if omitted.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Selector {
    Greedy,
    Hideg,
    Random,
}

#[derive(Args)]
struct ActiveArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Number of nodes to choose.
    #[arg(long)]
    k: usize,
    /// Monte-Carlo instances per influence estimate.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, value_enum, default_value = "greedy")]
    method: Selector,
    /// Only consider this many highest-degree nodes.
    #[arg(long)]
    candidates: Option<usize>,
    /// Output TSV; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Labeled nodes are the seeds.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    communities: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 8)]
    overlap: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0.3)]
    intra: f64,
    /// Writes `PREFIX.edges.tsv`, `PREFIX.labels.tsv` and
    /// `PREFIX.communities.tsv`.
    #[arg(long)]
    out_prefix: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match configure_workers().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.chain().any(|c| {
                c.is::<Invalid>() || c.is::<infprop::Error>() || c.is::<serde_json::Error>()
            });
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}

fn configure_workers() -> Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = value
        .parse()
        .ok()
        .filter(|&w| w > 0)
        .ok_or_else(|| invalid(format!("{WORKERS_ENV}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new().num_threads(workers).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.master_seed;
    match cli.command {
        Command::Predict(a) => cmd_predict(a, seed.unwrap_or(0)),
        Command::Evaluate(a) => cmd_evaluate(a, seed),
        Command::Active(a) => cmd_active(a, seed.unwrap_or(0)),
        Command::OracleCheck(a) => cmd_oracle(a),
        Command::Synth(a) => cmd_synth(a, seed.unwrap_or(0)),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_graph(args: &GraphArgs) -> Result<(DirectedGraph, NodeDict)> {
    let mut dict = NodeDict::new();
    let list = parse_edges(&read(&args.graph)?, &mut dict).with_context(|| args.graph.display().to_string())?;
    let mut g = list.build(dict.len(), args.undirected)?;
    if args.p_from_weight {
        g = g.with_weight_as_prob()?;
    } else if let Some(p) = args.p {
        g = g.with_default_params(p)?;
    } else if !g.has_params() {
        g = g.with_default_params(1.0)?;
    }
    Ok((g, dict))
}

fn load_labels(path: &Path, dict: &NodeDict) -> Result<Vec<Label>> {
    let entries = parse_labels(&read(path)?, dict).with_context(|| path.display().to_string())?;
    Ok(single_labels(&entries, dict.len())?)
}

fn cmd_predict(a: PredictArgs, master_seed: u64) -> Result<()> {
    let (g, dict) = load_graph(&a.graph)?;
    let n = g.num_nodes();
    let labels = load_labels(&a.labels, &dict)?;
    let entries: Vec<(usize, Label)> = match &a.seed_file {
        Some(path) => parse_seeds(&read(path)?, &dict)?
            .into_iter()
            .map(|(v, l)| match l.or(Some(labels[v]).filter(|&l| l > 0)) {
                Some(l) => Ok((v, l)),
                None => Err(invalid(format!("seed '{}' has no label", dict.name(v)))),
            })
            .collect::<Result<_>>()?,
        None => (0..n).filter(|&v| labels[v] > 0).map(|v| (v, labels[v])).collect(),
    };
    let num_labels = labels.iter().copied().chain(entries.iter().map(|e| e.1)).max().unwrap_or(0) as usize;
    let seeds = SeedSet::new(entries, num_labels, n)?;
    let samples = match (a.n, a.eps, a.delta) {
        (_, Some(eps), Some(delta)) => required_samples(eps, delta, n, num_labels)?,
        (Some(k), _, _) => k,
        _ => 1000,
    };
    let penalties = match &a.priors {
        Some(path) => Some(PenaltySource::new(parse_priors(&read(path)?, &dict, num_labels)?, PenaltyLink::NegLog)),
        None => None,
    };
    let model = a.graph.model.delay_model();
    let f = predict(a.method, &g, &seeds, &model, penalties.as_ref(), samples, master_seed, &LabelPropConfig::default())?;
    emit(a.out.as_deref(), &prediction_csv(&f, &dict))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateFile {
    data: DataSource,
    experiment: ExperimentConfig,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum DataSource {
    Files {
        graph: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        priors: Option<PathBuf>,
        #[serde(default)]
        undirected: bool,
    },
    Synth(SynthParams),
}

fn cmd_evaluate(a: EvaluateArgs, master_seed: Option<u64>) -> Result<()> {
    let file: EvaluateFile =
        serde_json::from_str(&read(&a.config)?).with_context(|| format!("parsing {}", a.config.display()))?;
    let mut config = file.experiment;
    if let Some(s) = master_seed {
        config.master_seed = s;
    }
    let base = a.config.parent().unwrap_or(Path::new("."));
    let (graph, labels, priors) = match file.data {
        DataSource::Files { graph, labels, priors, undirected } => {
            let mut dict = NodeDict::new();
            let list = parse_edges(&read(&base.join(&graph))?, &mut dict)?;
            let g = list.build(dict.len(), undirected)?;
            if config.p_global.is_none() && !g.has_params() {
                bail!(invalid("p_global is null but the edge file has no per-edge parameters"));
            }
            let truth = load_labels(&base.join(labels), &dict)?;
            if let Some(v) = truth.iter().position(|&l| l == 0) {
                bail!(invalid(format!("node '{}' has no label", dict.name(v))));
            }
            let num_labels = truth.iter().copied().max().unwrap_or(0) as usize;
            let priors = match priors {
                Some(p) => Some(parse_priors(&read(&base.join(p))?, &dict, num_labels)?),
                None => None,
            };
            (g, truth, priors)
        }
        DataSource::Synth(params) => {
            // repetitions use streams 0..R of the same master seed
            let s = synth_community(&params, &mut instance_rng(config.master_seed, u64::MAX))?;
            (s.graph, s.labels, None)
        }
    };
    let report = run_experiment(&config, &graph, &labels, priors.as_ref())?;
    let mut line = String::new();
    for (m, s) in &report.summary {
        write!(line, "{}={:.4}±{:.4} ", m.name(), s.mean, s.std)?;
    }
    eprintln!("{}", line.trim_end());
    match &a.out_prefix {
        Some(prefix) => {
            let path = |ext: &str| PathBuf::from(format!("{}.{ext}", prefix.display()));
            emit(Some(&path("json")), &report.to_json())?;
            emit(Some(&path("tsv")), &report.repetitions_tsv())?;
            if !report.curve.is_empty() {
                emit(Some(&path("curve.tsv")), &report.curve_tsv())?;
            }
            Ok(())
        }
        None => emit(None, &(report.to_json() + "\n")),
    }
}

fn cmd_active(a: ActiveArgs, master_seed: u64) -> Result<()> {
    let (g, dict) = load_graph(&a.graph)?;
    let model = a.graph.model.delay_model();
    let mut result = match a.method {
        Selector::Greedy => greedy_select(&g, &model, a.k, a.n, master_seed, a.candidates)?,
        Selector::Hideg => hideg_select(&g, a.k)?,
        Selector::Random => random_select(&g, a.k, &mut instance_rng(master_seed, 1))?,
    };
    if !matches!(a.method, Selector::Greedy) {
        let mut objective = MonteCarloInfluence::new(&g, &model, a.n, master_seed)?;
        evaluate_order(&mut objective, &mut result);
    }
    let mut out = String::from("rank\tnode\tgain\tinfluence\n");
    let mut total = 0.0;
    for (i, (&v, &gain)) in result.chosen.iter().zip(&result.marginal_gains).enumerate() {
        total += gain;
        writeln!(out, "{}\t{}\t{gain}\t{total}", i + 1, dict.name(v))?;
    }
    emit(a.out.as_deref(), &out)
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let (g, dict) = load_graph(&a.graph)?;
    let labels = load_labels(&a.labels, &dict)?;
    let entries: Vec<_> = (0..g.num_nodes()).filter(|&v| labels[v] > 0).map(|v| (v, labels[v])).collect();
    let num_labels = labels.iter().copied().max().unwrap_or(0) as usize;
    let seeds = SeedSet::new(entries, num_labels, g.num_nodes())?;
    let sol = solve(&g, &seeds)?;
    let f = sol.f.to_dense();
    let residual = residual_matrix(&f, &sol.infector, &sol.bias);
    let column = |l: usize| if l == 0 { "null".to_string() } else { format!("label_{l}") };
    let mut out = String::from("quantity,node,column,value\n");
    for (name, m) in [("f", &f), ("b", &sol.bias), ("residual", &residual)] {
        for v in 0..m.rows() {
            for l in 0..m.cols() {
                writeln!(out, "{name},{},{},{}", dict.name(v), column(l), m[(v, l)])?;
            }
        }
    }
    for u in 0..g.num_nodes() {
        for v in 0..g.num_nodes() {
            writeln!(out, "tbar,{},{},{}", dict.name(u), dict.name(v), sol.infector[(u, v)])?;
        }
    }
    eprintln!(
        "{} uncertain edges, residual norm {:e}",
        sol.uncertain_edges.len(),
        residual.frobenius()
    );
    emit(a.out.as_deref(), &out)
}

fn cmd_synth(a: SynthArgs, master_seed: u64) -> Result<()> {
    let params = SynthParams {
        communities: a.communities,
        size: a.size,
        overlap: a.overlap,
        noise: a.noise,
        intra: a.intra,
    };
    let s = synth_community(&params, &mut instance_rng(master_seed, 0))?;
    let dict = NodeDict::numbered(s.graph.num_nodes());
    let path = |ext: &str| PathBuf::from(format!("{}.{ext}", a.out_prefix.display()));
    emit(Some(&path("edges.tsv")), &write_edges(&s.graph, &dict))?;
    let mut labels = String::new();
    let mut communities = String::new();
    for (v, &l) in s.labels.iter().enumerate() {
        writeln!(labels, "{v}\t{l}")?;
        for c in &s.memberships[v] {
            writeln!(communities, "{v}\t{}", c + 1)?;
        }
    }
    emit(Some(&path("labels.tsv")), &labels)?;
    emit(Some(&path("communities.tsv")), &communities)?;
    eprintln!("{} nodes, {} arcs", s.graph.num_nodes(), s.graph.num_edges());
    Ok(())
}
