mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::Rng;

use common::{random_graph, random_seeds};
use infprop::baselines::{labelprop, shortpaths, LabelPropConfig};
use infprop::eval::{metrics, random_digraph};
use infprop::io::{parse_edges, write_edges, NodeDict};
use infprop::oracle::{exact_influence, naive_simulate, quadratic_objective, solve};
use infprop::propagation::basic_instance;
use infprop::{
    infprop, instance_rng, run_instance, DelayModel, DirectedGraph, PenaltyLink, PenaltySource, PredictionMatrix,
    PriorMatrix, ReplayTable, SeedSet,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_file_round_trip(seed in any::<u64>(), with_params in any::<bool>()) {
        let mut rng = instance_rng(seed, 0);
        let mut g = random_graph(&mut rng, 2..=9, 20);
        if !with_params {
            let edges: Vec<_> = g.edges().map(|(u, v, _)| (u, v, rng.random_range(0.01..10.0))).collect();
            g = DirectedGraph::new(g.num_nodes(), &edges).unwrap();
        }
        let mut dict = NodeDict::numbered(g.num_nodes());
        let back = parse_edges(&write_edges(&g, &dict), &mut dict).unwrap().build(g.num_nodes(), false).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn discrete_replay_agrees_across_algorithms(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let g = random_graph(&mut rng, 2..=8, 14);
        let seeds = random_seeds(&mut rng, g.num_nodes(), 3);
        let table = DelayModel::Replay(ReplayTable::sample(&DelayModel::IcUnit, &g, &mut rng));
        let fast = run_instance(&g, &seeds, &table, None, &mut rng).unwrap();
        prop_assert_eq!(&fast, &basic_instance(&g, &seeds, &table, &mut rng).unwrap());
        prop_assert_eq!(&fast, &naive_simulate(&g, &seeds, &table, &mut rng).unwrap());
    }

    #[test]
    fn continuous_replay_agrees(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let g = random_graph(&mut rng, 2..=10, 25);
        let seeds = random_seeds(&mut rng, g.num_nodes(), 3);
        let table = DelayModel::Replay(ReplayTable::sample(&DelayModel::ctic(), &g, &mut rng));
        prop_assert_eq!(
            run_instance(&g, &seeds, &table, None, &mut rng).unwrap(),
            basic_instance(&g, &seeds, &table, &mut rng).unwrap()
        );
    }

    #[test]
    fn unit_priors_change_nothing(seed in any::<u64>(), discrete in any::<bool>()) {
        let mut rng = instance_rng(seed, 0);
        let g = random_graph(&mut rng, 2..=12, 30);
        let seeds = random_seeds(&mut rng, g.num_nodes(), 3);
        let model = if discrete { DelayModel::IcUnit } else { DelayModel::ctic() };
        let ones = PenaltySource::new(PriorMatrix::ones(g.num_nodes(), seeds.num_labels()), PenaltyLink::NegLog);
        let a = infprop(&g, &seeds, &model, None, 64, seed).unwrap();
        let b = infprop(&g, &seeds, &model, Some(&ones), 64, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn estimates_are_valid_distributions(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let g = random_graph(&mut rng, 2..=12, 30);
        let seeds = random_seeds(&mut rng, g.num_nodes(), 3);
        let f = infprop(&g, &seeds, &DelayModel::ctic(), None, 37, seed).unwrap();
        prop_assert!(f.validate(Some(&seeds)).is_ok());
    }

    #[test]
    fn shortpaths_is_infprop_on_fixed_weights(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let n = rng.random_range(3..=12);
        let m = rng.random_range(1..=(n * (n - 1)).min(30));
        let edges: Vec<_> = random_digraph(n, m, &mut rng)
            .unwrap()
            .edges()
            .map(|(u, v, _)| (u, v, rng.random_range(0.5..2.0)))
            .collect();
        let g = DirectedGraph::new(n, &edges).unwrap().with_default_params(1.0).unwrap();
        let seeds = random_seeds(&mut rng, n, 3);
        let replay = DelayModel::Replay(ReplayTable::from_weights(&g).unwrap());
        let fast = infprop(&g, &seeds, &replay, None, 1, 0).unwrap();
        let slow = shortpaths(&g, &seeds).unwrap();
        prop_assert_eq!(fast.values(), slow.values());
    }

    #[test]
    fn labelprop_ignores_weight_scale(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = instance_rng(seed, 0);
        let g = random_graph(&mut rng, 3..=12, 30);
        let seeds = random_seeds(&mut rng, g.num_nodes(), 3);
        let scaled = |k: f64| {
            let edges: Vec<_> = g.edges().map(|(u, v, w)| (u, v, w * k)).collect();
            DirectedGraph::new(g.num_nodes(), &edges).unwrap()
        };
        let cfg = LabelPropConfig::default();
        let base = labelprop(&g, &seeds, &cfg).unwrap().prediction;
        for k in [2.0, 4.0, 0.5] {
            prop_assert_eq!(&labelprop(&scaled(k), &seeds, &cfg).unwrap().prediction, &base);
        }
        let other = labelprop(&scaled(c), &seeds, &cfg).unwrap().prediction;
        prop_assert!(other.max_abs_diff(&base) < 1e-9);
    }

    #[test]
    fn influence_is_monotone_and_submodular(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let g = random_graph(&mut rng, 4..=7, 12);
        let n = g.num_nodes();
        let order = rand::seq::index::sample(&mut rng, n, n).into_vec();
        let (small, big, v) = (&order[..1], &order[..n - 2], order[n - 1]);
        let sigma = |s: &[usize]| exact_influence(&g, s).unwrap();
        let with = |s: &[usize]| [s, &[v]].concat();
        prop_assert!(sigma(big) >= sigma(small) - 1e-12);
        prop_assert!(sigma(&with(small)) - sigma(small) >= sigma(&with(big)) - sigma(big) - 1e-12);
    }

    #[test]
    fn exact_solution_minimizes_objective(seed in any::<u64>(), delta in -0.5f64..0.5) {
        prop_assume!(delta.abs() > 1e-3);
        let mut rng = instance_rng(seed, 0);
        let g = random_graph(&mut rng, 2..=7, 10);
        let seeds = random_seeds(&mut rng, g.num_nodes(), 3);
        let sol = solve(&g, &seeds).unwrap();
        let f = sol.f.to_dense();
        let at_f = quadratic_objective(&f, &sol.infector, &sol.bias).unwrap();
        prop_assert!(at_f < 1e-20);
        let j = rng.random_range(0..g.num_nodes());
        let mut moved = f.clone();
        moved[(j, 0)] += delta;
        let after = quadratic_objective(&moved, &sol.infector, &sol.bias).unwrap();
        if sol.infector[(j, j)] < 1.0 - 1e-9 {
            prop_assert!(after > at_f);
        } else {
            prop_assert!(after >= at_f);
        }
    }

    #[test]
    fn metrics_ignore_node_order(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 0);
        let n = rng.random_range(4..40);
        let num_labels = rng.random_range(2..5);
        let truth: Vec<u32> = (0..n).map(|_| rng.random_range(1..=num_labels as u32)).collect();
        let mut rows = Vec::new();
        for _ in 0..n {
            let mut r: Vec<f64> = (0..=num_labels).map(|_| rng.random_range(0..4) as f64).collect();
            r[0] = 1.0;
            let s: f64 = r.iter().sum();
            rows.extend(r.iter().map(|x| x / s));
        }
        let f = PredictionMatrix::from_rows(n, num_labels, rows).unwrap();
        let perm = rand::seq::index::sample(&mut rng, n, n).into_vec();
        let mut moved = PredictionMatrix::zeros(n, num_labels);
        let mut moved_truth = vec![0; n];
        for (v, &pv) in perm.iter().enumerate() {
            moved.row_mut(pv).copy_from_slice(f.row(v));
            moved_truth[pv] = truth[v];
        }
        let eval: Vec<usize> = (0..n).collect();
        let a = metrics(&f, &truth, &eval, 1).unwrap();
        let b = metrics(&moved, &moved_truth, &eval, 1).unwrap();
        prop_assert_eq!(a.accuracy, b.accuracy);
        prop_assert_eq!(a.top1, b.top1);
        assert_abs_diff_eq!(a.mse, b.mse, epsilon = 1e-12);
        assert_abs_diff_eq!(a.auc.unwrap_or(0.0), b.auc.unwrap_or(0.0), epsilon = 1e-12);
    }
}

#[test]
fn worker_count_does_not_change_estimates() {
    let mut rng = instance_rng(11, 0);
    let g = random_graph(&mut rng, 30..=30, 200);
    let seeds = random_seeds(&mut rng, 30, 3);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| infprop(&g, &seeds, &DelayModel::ctic(), None, 1000, 42).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(8));
}

#[test]
fn penalty_prefers_likely_label() {
    // two symmetric seeds; a prior against label 2 at the middle node shifts mass to label 1
    let g = DirectedGraph::undirected(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap().with_default_params(1.0).unwrap();
    let seeds = SeedSet::new(vec![(0, 1), (2, 2)], 2, 3).unwrap();
    let mut priors = PriorMatrix::ones(3, 2);
    priors.set(1, 2, 0.2).unwrap();
    let pen = PenaltySource::new(priors, PenaltyLink::NegLog);
    let plain = infprop(&g, &seeds, &DelayModel::ctic(), None, 4000, 1).unwrap();
    let biased = infprop(&g, &seeds, &DelayModel::ctic(), Some(&pen), 4000, 1).unwrap();
    assert_abs_diff_eq!(plain.get(1, 1), 0.5, epsilon = 0.03);
    assert!(biased.get(1, 1) > plain.get(1, 1) + 0.1);
}
