mod common;

use proptest::prelude::*;
use pvsignal::ingest::{filter_reports, RoleFilter};
use pvsignal::scalar::{dot, sigmoid};
use pvsignal::synth::{self, SynthSpec};
use pvsignal::train::*;
use pvsignal::vocab::{build_vocabularies, emit_events, Vocabulary};

use common::*;

fn vocab(prefix: &str, n: usize) -> Vocabulary {
    Vocabulary::from_counts((0..n).map(|i| (format!("{prefix}{i}"), 1 + i as u64))).unwrap()
}

#[test]
fn init_coordinates_pass_ks_uniformity() {
    let dim = 100;
    let ades = vocab("a", 1000);
    let drugs = vocab("d", 3);
    let cfg = TrainConfig { dim, seed: 11, ..TrainConfig::default() };
    let space = init_space::<f64>(&ades, &drugs, &cfg).unwrap();
    let half = 0.5 / dim as f64;
    let mut xs = space.ades.as_slice().to_vec();
    assert_eq!(xs.len(), 100_000);
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        assert!(x.abs() <= half);
        let f = (x + half) / (2.0 * half);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    assert!(space.drugs.as_slice().iter().all(|&v| v == 0.0));
    assert_eq!(init_space::<f64>(&ades, &drugs, &cfg).unwrap(), space);
}

#[test]
fn single_event_is_learned() {
    let ades = vocab("a", 1);
    let drugs = Vocabulary::from_counts([("d0", 1), ("d1", 1)]).unwrap();
    let cfg = TrainConfig {
        dim: 5,
        epochs: 50,
        negative_samples: 1,
        initial_learning_rate: 0.5,
        seed: 3,
        ..TrainConfig::default()
    };
    let corpus = TrainingCorpus {
        events: vec![TrainingEvent { ade: 0, drug: 0 }],
        ade_frequency: vec![1],
        drug_frequency: vec![1, 1],
    };
    let mut space = init_space::<f64>(&ades, &drugs, &cfg).unwrap();
    train(&mut space, &corpus, &cfg).unwrap();
    let p = space.score_pair("a0", "d0").unwrap();
    assert!(p > 0.9, "sigma = {p}");
    assert!(space.score_pair("a0", "d1").unwrap() < 0.5);
}

#[test]
fn zero_events_leave_the_space_unchanged() {
    let (ades, drugs) = (vocab("a", 4), vocab("d", 4));
    let cfg = TrainConfig { dim: 8, ..TrainConfig::default() };
    let corpus = TrainingCorpus { events: vec![], ade_frequency: vec![1; 4], drug_frequency: vec![1; 4] };
    let mut space = init_space::<f32>(&ades, &drugs, &cfg).unwrap();
    let before = space.clone();
    train(&mut space, &corpus, &cfg).unwrap();
    assert_eq!(space, before);
}

#[test]
fn scores_of_hand_set_vectors() {
    let (ades, drugs) = (vocab("a", 1), vocab("d", 1));
    let cfg = TrainConfig { dim: 2, ..TrainConfig::default() };
    let mut space = init_space::<f64>(&ades, &drugs, &cfg).unwrap();
    assert_eq!(space.score_pair("a0", "d0").unwrap(), 0.5);
    space.ades.row_mut(0).copy_from_slice(&[1.0, 0.0]);
    space.drugs.row_mut(0).copy_from_slice(&[2.0, 0.0]);
    assert!((space.score_pair("a0", "d0").unwrap() - 0.880797).abs() < 1e-6);
    space.drugs.row_mut(0).copy_from_slice(&[0.0, 3.0]);
    assert_eq!(space.score_pair("a0", "d0").unwrap(), 0.5);
    assert!(space.score_pair("a0", "nope").is_err());
}

fn small_corpus(seed: u64) -> (Vocabulary, Vocabulary, TrainingCorpus) {
    let mut rng = rng(seed);
    let reports = random_reports(&mut rng, 300, 20, 12);
    let (drugs, ades) = build_vocabularies(&reports, 1).unwrap();
    let corpus = TrainingCorpus::new(emit_events(&reports, &drugs, &ades), &ades, &drugs);
    (ades, drugs, corpus)
}

#[test]
fn epoch_loss_decreases_with_at_most_one_exception() {
    let (ades, drugs, corpus) = small_corpus(4);
    let cfg = TrainConfig { dim: 20, epochs: 5, seed: 1, ..TrainConfig::default() };
    let mut space = init_space::<f64>(&ades, &drugs, &cfg).unwrap();
    let report = train(&mut space, &corpus, &cfg).unwrap();
    assert_eq!(report.epoch_loss.len(), 5);
    let rises = report.epoch_loss.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(rises <= 1, "{:?}", report.epoch_loss);
}

#[test]
fn single_threaded_training_is_bitwise_deterministic() {
    let (ades, drugs, corpus) = small_corpus(5);
    for threads in [1, 3] {
        let cfg = TrainConfig { dim: 16, epochs: 3, seed: 9, threads, ..TrainConfig::default() };
        let run = || {
            let mut space = init_space::<f64>(&ades, &drugs, &cfg).unwrap();
            let report = train(&mut space, &corpus, &cfg).unwrap();
            (space, report)
        };
        assert_eq!(run(), run());
    }
    let cfg = |seed| TrainConfig { dim: 16, epochs: 2, seed, ..TrainConfig::default() };
    let mut a = init_space::<f64>(&ades, &drugs, &cfg(1)).unwrap();
    let mut b = init_space::<f64>(&ades, &drugs, &cfg(2)).unwrap();
    train(&mut a, &corpus, &cfg(1)).unwrap();
    train(&mut b, &corpus, &cfg(2)).unwrap();
    assert_ne!(a.drugs, b.drugs);
}

#[test]
fn planted_class_scores_above_background() {
    let spec = SynthSpec::planted(20_000, 60, 20, 3, 5, 0, 0, 4.0, 0.0, 17);
    let corpus = synth::generate(&spec).unwrap();
    let reports: Vec<_> = filter_reports(corpus.reports, RoleFilter::Full, None).collect();
    let (drugs, ades) = build_vocabularies(&reports, 1).unwrap();
    let tc = TrainingCorpus::new(emit_events(&reports, &drugs, &ades), &ades, &drugs);
    let cfg = TrainConfig { dim: 32, epochs: 5, seed: 2, ..TrainConfig::default() };
    let mut space = init_space::<f32>(&ades, &drugs, &cfg).unwrap();
    train(&mut space, &tc, &cfg).unwrap();
    for class in &spec.classes {
        let ade = synth::ade_name(class.ade);
        let mean = |inside: bool| {
            let scores: Vec<f64> = (0..spec.n_drugs)
                .filter(|d| class.members.contains(d) == inside)
                .filter_map(|d| space.score_pair(&ade, &synth::drug_name(d)).ok())
                .map(f64::from)
                .collect();
            scores.iter().sum::<f64>() / scores.len() as f64
        };
        let (inside, outside) = (mean(true), mean(false));
        assert!(inside > outside, "class ADE {ade}: {inside} vs {outside}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = rng(21);
    for _ in 0..100 {
        let err = sgns_gradient_error(&mut rng);
        assert!(err < 1e-5, "relative error {err}");
    }
}

#[test]
fn config_and_corpus_errors() {
    let (ades, drugs) = (vocab("a", 2), vocab("d", 2));
    assert!(init_space::<f64>(&ades, &drugs, &TrainConfig { dim: 0, ..TrainConfig::default() }).is_err());
    assert!(init_space::<f64>(&Vocabulary::new(), &drugs, &TrainConfig::default()).is_err());
    let cfg = TrainConfig { dim: 4, ..TrainConfig::default() };
    let mut space = init_space::<f64>(&ades, &drugs, &cfg).unwrap();
    let bad = TrainingCorpus {
        events: vec![TrainingEvent { ade: 0, drug: 7 }],
        ade_frequency: vec![1; 2],
        drug_frequency: vec![1; 2],
    };
    assert!(train(&mut space, &bad, &cfg).is_err());
}

proptest! {
    #[test]
    fn residual_is_minus_the_loss_derivative(x in -30.0f64..30.0, label: bool) {
        // d/dx softplus(-x) = -(1 - sigmoid(x)); d/dx softplus(x) = sigmoid(x).
        let want = if label { 1.0 - sigmoid(x) } else { -sigmoid(x) };
        prop_assert!((logistic_residual(x, label) - want).abs() < 1e-15);
    }

    #[test]
    fn loss_is_positive_and_matches_definition(seed: u64, k in 0usize..5) {
        use rand::Rng;
        let mut rng = rng(seed);
        let v = |rng: &mut rand_chacha::ChaCha8Rng| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
        let (a, p) = (v(&mut rng), v(&mut rng));
        let negs: Vec<Vec<f64>> = (0..k).map(|_| v(&mut rng)).collect();
        let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        let want = -sigmoid(dot(&a, &p)).ln() - negs.iter().map(|n| sigmoid(-dot(&a, n)).ln()).sum::<f64>();
        let got = sgns_loss(&a, &p, &refs);
        prop_assert!(got > 0.0);
        prop_assert!((got - want).abs() < 1e-10 * want.max(1.0));
    }
}
