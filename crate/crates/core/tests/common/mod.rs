//! Brute-force oracles and random instance builders shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use pvsignal::embedding::VectorTable;
use pvsignal::ingest::{DrugMention, Report, Role};
use pvsignal::lexicon::LexiconGraph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reports with 1..=max_drugs drugs and 1..=max_ades ADEs drawn with
/// replacement, so duplicates inside a report occur.
pub fn random_reports(rng: &mut ChaCha8Rng, n: usize, n_drugs: usize, n_ades: usize) -> Vec<Report> {
    let roles = [Role::PrimarySuspect, Role::SecondarySuspect, Role::Concomitant, Role::Interacting];
    (0..n)
        .map(|i| {
            let mut r = Report::new(format!("r{i}"));
            for _ in 0..rng.gen_range(1..=4) {
                let d = rng.gen_range(0..n_drugs);
                r.push_drug(DrugMention::new(&format!("d{d}"), *roles.choose(rng).unwrap()));
            }
            for _ in 0..rng.gen_range(1..=4) {
                r.push_event(&format!("A{}", rng.gen_range(0..n_ades)));
            }
            r
        })
        .collect()
}

/// Distinct drug and ADE sets of a report, computed independently of the
/// library helpers.
pub fn report_sets(r: &Report) -> (BTreeSet<String>, BTreeSet<String>) {
    let drugs = r.drugs.iter().map(|d| d.normalized_name.clone()).collect();
    let ades = r.adverse_events.iter().cloned().collect();
    (drugs, ades)
}

/// Per-report scan of the 2x2 table for one pair, restricted to reports
/// holding at least one in-vocabulary drug and ADE.
pub fn brute_force_cells(
    reports: &[Report],
    drug_vocab: &BTreeSet<String>,
    ade_vocab: &BTreeSet<String>,
    drug: &str,
    ade: &str,
) -> (u64, u64, u64, u64) {
    let (mut a, mut b, mut c, mut d) = (0, 0, 0, 0);
    for r in reports {
        let (ds, es) = report_sets(r);
        if !ds.iter().any(|x| drug_vocab.contains(x)) || !es.iter().any(|x| ade_vocab.contains(x)) {
            continue;
        }
        match (ds.contains(drug), es.contains(ade)) {
            (true, true) => a += 1,
            (true, false) => b += 1,
            (false, true) => c += 1,
            (false, false) => d += 1,
        }
    }
    (a, b, c, d)
}

/// Number of reports each term appears in.
pub fn report_frequencies(reports: &[Report]) -> (HashMap<String, u64>, HashMap<String, u64>) {
    let mut drugs = HashMap::new();
    let mut ades = HashMap::new();
    for r in reports {
        let (ds, es) = report_sets(r);
        for d in ds {
            *drugs.entry(d).or_insert(0) += 1;
        }
        for e in es {
            *ades.entry(e).or_insert(0) += 1;
        }
    }
    (drugs, ades)
}

/// O(P*N) pairwise AUC with ties counted as one half.
pub fn auc_oracle(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &p in pos {
        for &n in neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

pub fn random_table(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> VectorTable<f64> {
    VectorTable::from_rows(
        dim,
        (0..n).map(|i| (format!("t{i:03}"), (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>())),
    )
    .unwrap()
}

/// Random graph over table terms plus a few terms absent from the table.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, edges: usize) -> LexiconGraph {
    let mut g = LexiconGraph::new();
    for _ in 0..edges {
        let a = rng.gen_range(0..n + 3);
        let b = rng.gen_range(0..n + 3);
        let name = |i: usize| if i < n { format!("t{i:03}") } else { format!("ghost{i}") };
        g.connect(&name(a), &name(b));
    }
    g
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest relative error, over every vector of one random SGNS
/// configuration, between the analytic gradient and central differences.
pub fn sgns_gradient_error(rng: &mut ChaCha8Rng) -> f64 {
    use pvsignal::train::{sgns_gradient, sgns_loss};

    let dim = rng.gen_range(1..=50);
    let k = rng.gen_range(0..=6);
    let scale = rng.gen_range(0.05..1.5);
    let vec = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.gen_range(-scale..scale)).collect::<Vec<f64>>();
    let ade = vec(rng);
    let pos = vec(rng);
    let negs: Vec<Vec<f64>> = (0..k).map(|_| vec(rng)).collect();

    let loss = |ade: &[f64], pos: &[f64], negs: &[Vec<f64>]| {
        let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        sgns_loss(ade, pos, &refs)
    };
    let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
    let grad = sgns_gradient(&ade, &pos, &refs);

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    // slot 0 = ADE, 1 = positive drug, 2.. = negatives
    for slot in 0..2 + k {
        let analytic = match slot {
            0 => &grad.ade,
            1 => &grad.positive,
            s => &grad.negatives[s - 2],
        };
        let mut numeric = vec![0.0; dim];
        for i in 0..dim {
            let eval = |delta: f64| {
                let (mut a, mut p, mut n) = (ade.clone(), pos.clone(), negs.clone());
                match slot {
                    0 => a[i] += delta,
                    1 => p[i] += delta,
                    s => n[s - 2][i] += delta,
                }
                loss(&a, &p, &n)
            };
            numeric[i] = (eval(h) - eval(-h)) / (2.0 * h);
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let size = pvsignal::scalar::norm(analytic).max(pvsignal::scalar::norm(&numeric)).max(1e-8);
        worst = worst.max(diff / size);
    }
    worst
}

pub fn prr_oracle(a: u64, b: u64, c: u64, d: u64) -> Option<f64> {
    if a + b == 0 || c + d == 0 || c == 0 {
        return None;
    }
    let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
    Some((a / (a + b)) / (c / (c + d)))
}

pub fn ror_oracle(a: u64, b: u64, c: u64, d: u64) -> Option<f64> {
    if b == 0 || c == 0 || d == 0 {
        return None;
    }
    let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
    Some((a / b) / (c / d))
}

/// Builds one random corpus of at most `max_reports` reports and compares
/// cells, PRR and ROR with the per-report scan for `pairs` random pairs.
/// Returns a description of the first mismatch.
pub fn disproportionality_mismatch(rng: &mut ChaCha8Rng, max_reports: usize, pairs: usize) -> Option<String> {
    use pvsignal::disproportionality::{contingency, prr, ror};
    use pvsignal::vocab::{accumulate_counts, build_vocabularies};

    let n = rng.gen_range(1..=max_reports);
    let n_drugs = rng.gen_range(1..=25);
    let n_ades = rng.gen_range(1..=15);
    let reports = random_reports(rng, n, n_drugs, n_ades);
    let min_count = rng.gen_range(1..=2);
    let Ok((drugs, ades)) = build_vocabularies(&reports, min_count) else {
        return Some("vocabulary construction failed".into());
    };
    if drugs.is_empty() || ades.is_empty() {
        return None;
    }
    let counts = accumulate_counts(&reports, &drugs, &ades);
    let dv: BTreeSet<String> = drugs.terms().iter().cloned().collect();
    let av: BTreeSet<String> = ades.terms().iter().cloned().collect();
    for _ in 0..pairs {
        let drug = drugs.term(rng.gen_range(0..drugs.len()));
        let ade = ades.term(rng.gen_range(0..ades.len()));
        let (a, b, c, d) = brute_force_cells(&reports, &dv, &av, drug, ade);
        let t = contingency(&counts, &drugs, &ades, drug, ade).ok()?;
        if (t.a, t.b, t.c, t.d) != (a, b, c, d) {
            return Some(format!("{drug}/{ade}: cells {t:?} vs {:?}", (a, b, c, d)));
        }
        if prr::<f64>(&t).ok() != prr_oracle(a, b, c, d) {
            return Some(format!("{drug}/{ade}: PRR differs for {t:?}"));
        }
        if ror::<f64>(&t).ok() != ror_oracle(a, b, c, d) {
            return Some(format!("{drug}/{ade}: ROR differs for {t:?}"));
        }
    }
    None
}

/// One random AUC instance; returns (library AUC, oracle AUC).
pub fn auc_instance(rng: &mut ChaCha8Rng, kind: usize) -> (f64, f64) {
    let p = rng.gen_range(1..=40);
    let q = rng.gen_range(1..=40);
    let levels = rng.gen_range(1..=8);
    let (pos, neg): (Vec<f64>, Vec<f64>) = match kind % 4 {
        // all tied
        0 => (vec![0.3; p], vec![0.3; q]),
        // separable
        1 => (
            (0..p).map(|_| rng.gen_range(1.0..2.0)).collect(),
            (0..q).map(|_| rng.gen_range(-1.0..0.5)).collect(),
        ),
        // heavy ties on a coarse grid
        2 => (
            (0..p).map(|_| rng.gen_range(0..levels) as f64).collect(),
            (0..q).map(|_| rng.gen_range(0..levels) as f64).collect(),
        ),
        _ => (
            (0..p).map(|_| rng.gen_range(-1.0..1.2)).collect(),
            (0..q).map(|_| rng.gen_range(-1.2..1.0)).collect(),
        ),
    };
    (pvsignal::eval::auc_from_scores(&pos, &neg).unwrap(), auc_oracle(&pos, &neg))
}

/// Writes a synthetic corpus (reports, lexicon, truth) plus a manifest into
/// `dir` and returns the manifest path. `sections` is appended verbatim
/// after the `[input]` block.
pub fn synth_workspace(dir: &std::path::Path, spec: &pvsignal::synth::SynthSpec, sections: &str) -> PathBuf {
    use std::io::Write;

    let corpus = pvsignal::synth::generate(spec).unwrap();
    let mut w = std::fs::File::create(dir.join("reports.tsv")).unwrap();
    pvsignal::ingest::write_canonical(&mut w, &corpus.reports).unwrap();
    w.flush().unwrap();
    let mut w = std::fs::File::create(dir.join("lexicon.txt")).unwrap();
    corpus.lexicon.write_lexicon(&mut w).unwrap();
    let mut w = std::fs::File::create(dir.join("truth.tsv")).unwrap();
    pvsignal::eval::write_reference(&mut w, &corpus.truth).unwrap();
    let manifest = dir.join("manifest.ini");
    std::fs::write(
        &manifest,
        format!("[input]\nreports = reports.tsv\nlexicon = lexicon.txt\nreference.synth = truth.tsv\n\n{sections}"),
    )
    .unwrap();
    manifest
}
