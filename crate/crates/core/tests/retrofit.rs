mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use pvsignal::embedding::VectorTable;
use pvsignal::lexicon::LexiconGraph;
use pvsignal::retrofit::*;
use pvsignal::scalar::norm;
use rand::Rng;

use common::*;

fn table(rows: &[(&str, &[f64])]) -> VectorTable<f64> {
    VectorTable::from_rows(rows[0].1.len(), rows.iter().map(|(t, v)| (*t, v.to_vec()))).unwrap()
}

fn run_to_convergence(beta: f64) -> RetrofitConfig<f64> {
    RetrofitConfig {
        iterations: 2000,
        tolerance: 0.0,
        ..RetrofitConfig::with_beta(beta)
    }
}

/// Objective after each single sweep, obtained by running k = 0..=n sweeps.
fn objective_trace(t: &VectorTable<f64>, g: &LexiconGraph, cfg: &RetrofitConfig<f64>, n: usize) -> Vec<f64> {
    let anchors = if cfg.normalize_first { t.normalized() } else { t.clone() };
    let mut trace = vec![objective_value(&anchors, t, g, cfg)];
    for k in 1..=n {
        let c = RetrofitConfig { iterations: k, tolerance: 0.0, ..*cfg };
        trace.push(objective_value(&retrofit(t, g, &c).unwrap().drug_vectors, t, g, &c));
    }
    trace
}

#[test]
fn beta_zero_is_identity() {
    let mut rng = rng(1);
    let t = random_table(&mut rng, 30, 8);
    let g = random_graph(&mut rng, 30, 60);
    let out = retrofit(&t, &g, &RetrofitConfig::with_beta(0.0)).unwrap();
    assert_eq!(out.drug_vectors, t);
    let norm_cfg = RetrofitConfig { normalize_first: true, ..RetrofitConfig::with_beta(0.0) };
    let out = retrofit(&t, &g, &norm_cfg).unwrap();
    assert!(max_abs_diff(out.drug_vectors.as_slice(), t.normalized().as_slice()) < 1e-15);
}

#[test]
fn frozen_neighbor_gives_midpoint() {
    let t = table(&[("i", &[4.0, -2.0]), ("j", &[1.0, 3.0])]);
    let mut g = LexiconGraph::new();
    g.connect("i", "j");
    let frozen: HashSet<&str> = ["j"].into();
    let out = retrofit_with_frozen(&t, &g, &run_to_convergence(0.5), &frozen).unwrap();
    assert_eq!(out.drug_vectors.get("i").unwrap(), &[2.5, 0.5]);
    assert_eq!(out.drug_vectors.get("j").unwrap(), &[1.0, 3.0]);
}

#[test]
fn free_pair_converges_to_weighted_average() {
    // q_i = (2 qhat_i + qhat_j) / 3 solves the coupled pair at alpha = beta = 0.5.
    let t = table(&[("i", &[3.0, 0.0]), ("j", &[0.0, 3.0])]);
    let mut g = LexiconGraph::new();
    g.connect("i", "j");
    let out = retrofit(&t, &g, &run_to_convergence(0.5)).unwrap();
    assert!(max_abs_diff(out.drug_vectors.get("i").unwrap(), &[2.0, 1.0]) < 1e-9);
    assert!(max_abs_diff(out.drug_vectors.get("j").unwrap(), &[1.0, 2.0]) < 1e-9);
}

#[test]
fn beta_one_collapses_a_clique() {
    let t = table(&[("a", &[1.0, 0.0, 2.0]), ("b", &[0.0, 5.0, -1.0]), ("c", &[-3.0, 1.0, 0.5])]);
    let mut g = LexiconGraph::new();
    g.connect("a", "b");
    g.connect("b", "c");
    g.connect("a", "c");
    let out = retrofit(&t, &g, &run_to_convergence(1.0)).unwrap().drug_vectors;
    assert!(max_abs_diff(out.row(0), out.row(1)) < 1e-9);
    assert!(max_abs_diff(out.row(1), out.row(2)) < 1e-9);
}

#[test]
fn triangle_matches_closed_form() {
    // Summing the three fixed-point equations preserves the total X, so
    // q_i = (alpha x_i + beta X / 2) / (1 + beta / 2).
    let t = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 2.0]), ("c", &[-4.0, 1.0])]);
    let mut g = LexiconGraph::new();
    g.connect("a", "b");
    g.connect("b", "c");
    g.connect("a", "c");
    let beta = 0.3;
    let out = retrofit(&t, &g, &run_to_convergence(beta)).unwrap().drug_vectors;
    let total = [-3.0, 3.0];
    for i in 0..3 {
        let want: Vec<f64> = (0..2)
            .map(|k| ((1.0 - beta) * t.row(i)[k] + beta * total[k] / 2.0) / (1.0 + beta / 2.0))
            .collect();
        assert!(max_abs_diff(out.row(i), &want) < 1e-9);
    }
}

#[test]
fn objective_by_hand() {
    // One edge, inverse degree, alpha = 0.6, beta = 0.4:
    // 0.6 * (|q_a - a|^2 + |q_b - b|^2) + 0.4 * |q_a - q_b|^2.
    let orig = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
    let cur = table(&[("a", &[2.0, 1.0]), ("b", &[0.0, -1.0])]);
    let mut g = LexiconGraph::new();
    g.connect("a", "b");
    let cfg = RetrofitConfig::with_beta(0.4);
    let want = 0.6 * (2.0 + 4.0) + 0.4 * (4.0 + 4.0);
    assert!((objective_value(&cur, &orig, &g, &cfg) - want).abs() < 1e-12);
    assert_eq!(objective_value(&orig, &orig, &g, &RetrofitConfig::with_beta(0.0)), 0.0);
}

#[test]
fn rescale_examples() {
    let v = table(&[("x", &[1.0, 0.0])]);
    let vr = table(&[("x", &[0.0, 2.0])]);
    assert_eq!(rescale(&v, &vr).unwrap().table.row(0), &[0.0, 1.0]);
    let same = table(&[("x", &[0.6, 0.8])]);
    assert_eq!(rescale(&same, &same).unwrap().table, same);
    let zero = table(&[("x", &[0.0, 0.0])]);
    let out = rescale(&v, &zero).unwrap();
    assert_eq!((out.table.row(0), out.degenerate_rows), (&[1.0, 0.0][..], 1));
    let other = table(&[("y", &[0.0, 2.0])]);
    assert!(rescale(&v, &other).is_err());
}

#[test]
fn rescale_after_uses_raw_norms_and_copies_untouched_rows() {
    let mut rng = rng(9);
    let t = random_table(&mut rng, 20, 6);
    let mut g = LexiconGraph::new();
    g.connect("t000", "t001");
    g.connect("t001", "t002");
    let cfg = RetrofitConfig { normalize_first: true, rescale_after: true, ..RetrofitConfig::with_beta(0.5) };
    let out = retrofit(&t, &g, &cfg).unwrap();
    assert_eq!(out.updated_terms, 3);
    for i in 0..t.len() {
        let want = norm(t.row(i));
        assert!((norm(out.drug_vectors.row(i)) - want).abs() <= 1e-12 * want);
    }
    for i in 3..t.len() {
        assert_eq!(out.drug_vectors.row(i), t.row(i));
    }
}

#[test]
fn config_errors() {
    let t = table(&[("a", &[1.0])]);
    let g = LexiconGraph::new();
    let bad_sum = RetrofitConfig { alpha: 0.5, ..RetrofitConfig::with_beta(0.3) };
    assert!(retrofit(&t, &g, &bad_sum).is_err());
    let no_iter = RetrofitConfig { iterations: 0, ..RetrofitConfig::with_beta(0.3) };
    assert!(retrofit(&t, &g, &no_iter).is_err());
    let mut g = LexiconGraph::new();
    g.connect("a", "missing");
    let out = retrofit(&t, &g, &RetrofitConfig::with_beta(0.3)).unwrap();
    assert_eq!((out.ignored_graph_terms, out.updated_terms, out.unchanged_terms), (1, 0, 1));
}

fn arb_instance() -> impl Strategy<Value = (VectorTable<f64>, LexiconGraph, RetrofitConfig<f64>)> {
    (any::<u64>(), 2usize..40, 0usize..120, 0.0f64..=1.0, any::<bool>(), any::<bool>()).prop_map(
        |(seed, n, e, beta, normalize, uniform)| {
            let mut rng = rng(seed);
            let dim = rng.gen_range(1..6);
            let t = random_table(&mut rng, n, dim);
            let g = random_graph(&mut rng, n, e);
            let cfg = RetrofitConfig {
                normalize_first: normalize,
                weighting: if uniform { NeighborWeighting::Uniform } else { NeighborWeighting::InverseDegree },
                ..RetrofitConfig::with_beta(beta)
            };
            (t, g, cfg)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_never_increases((t, g, cfg) in arb_instance()) {
        let trace = objective_trace(&t, &g, &cfg, 8);
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{:?}", trace);
        }
    }

    #[test]
    fn neighborless_rows_are_bitwise_unchanged((t, g, cfg) in arb_instance()) {
        let out = retrofit(&t, &g, &cfg).unwrap().drug_vectors;
        let anchors = if cfg.normalize_first { t.normalized() } else { t.clone() };
        let in_table: HashSet<&str> = t.terms().iter().map(String::as_str).collect();
        for i in 0..t.len() {
            if !g.neighbors(t.term(i)).any(|n| in_table.contains(n)) {
                prop_assert_eq!(out.row(i), anchors.row(i));
            }
        }
    }

    #[test]
    fn converges_to_fixed_point((t, g, cfg) in arb_instance()) {
        let cfg = RetrofitConfig { iterations: 500, tolerance: 1e-6, ..cfg };
        let out = retrofit(&t, &g, &cfg).unwrap();
        if let Some(&last) = out.max_change.last() {
            prop_assert!(last < 1e-6 || cfg.beta == 1.0, "{:?}", out.max_change);
        }
    }

    #[test]
    fn rescale_preserves_norm_and_direction(seed in any::<u64>(), dim in 1usize..100) {
        let mut rng = rng(seed);
        let v = random_table(&mut rng, 4, dim);
        let vr = random_table(&mut rng, 4, dim);
        let out = rescale(&v, &vr).unwrap().table;
        for i in 0..4 {
            let (n_out, n_v, n_r) = (norm(out.row(i)), norm(v.row(i)), norm(vr.row(i)));
            prop_assert!((n_out - n_v).abs() <= 1e-9 * n_v);
            let cos: f64 = out.row(i).iter().zip(vr.row(i)).map(|(a, b)| a * b).sum::<f64>() / (n_out * n_r);
            prop_assert!((cos - 1.0).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn max_row_change_is_non_increasing((t, g, cfg) in arb_instance()) {
        let cfg = RetrofitConfig { iterations: 50, tolerance: 0.0, ..cfg };
        let out = retrofit(&t, &g, &cfg).unwrap();
        for w in out.max_change.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-15, "{:?}", out.max_change);
        }
    }
}
