//! Synthetic report corpora with planted drug-class/ADE associations, name
//! noise and known ground truth.
//!
//! Each report lists `1 + Geometric(0.5)` drugs and ADEs (capped at 10),
//! drawn uniformly without replacement. When a report carries an active
//! member of a planted class, the class ADE is added so that its marginal
//! probability becomes `lift * baseline`. A held-out member is active only
//! when mentioned under its synonym, so its canonical name carries no signal
//! and can only pick it up through the lexicon. Decoys are linked to a class
//! in the lexicon but never active.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{Label, ReferencePair};
use crate::ingest::{normalize_drugname, DrugMention, Report, ReportDate, Role};
use crate::lexicon::LexiconGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedClass {
    /// Drug indices whose mentions raise the ADE rate.
    pub members: Vec<usize>,
    /// Members active only under their synonym surface.
    pub held_out: Vec<usize>,
    /// Lexicon-only members; labeled negative in the truth set.
    pub decoys: Vec<usize>,
    pub ade: usize,
    pub lift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_reports: usize,
    pub n_drugs: usize,
    pub n_ades: usize,
    pub classes: Vec<PlantedClass>,
    pub synonym_rate: f64,
    /// Background drugs paired with each class ADE as truth negatives.
    pub negatives_per_class: usize,
    pub max_drugs_per_report: usize,
    pub max_ades_per_report: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// Lays out `n_classes` classes over the first drug indices: each has
    /// `members` drugs (the last `held_out` of them held out) plus `decoys`,
    /// and targets ADE `c`.
    #[allow(clippy::too_many_arguments)]
    pub fn planted(
        n_reports: usize,
        n_drugs: usize,
        n_ades: usize,
        n_classes: usize,
        members: usize,
        held_out: usize,
        decoys: usize,
        lift: f64,
        synonym_rate: f64,
        seed: u64,
    ) -> Self {
        let stride = members + decoys;
        let classes = (0..n_classes)
            .map(|c| {
                let base = c * stride;
                PlantedClass {
                    members: (base..base + members).collect(),
                    held_out: (base + members - held_out.min(members)..base + members).collect(),
                    decoys: (base + members..base + stride).collect(),
                    ade: c,
                    lift,
                }
            })
            .collect();
        SynthSpec {
            n_reports,
            n_drugs,
            n_ades,
            classes,
            synonym_rate,
            negatives_per_class: 10,
            max_drugs_per_report: 10,
            max_ades_per_report: 10,
            seed,
        }
    }

    /// Probability that a given ADE appears in a report by chance alone.
    pub fn baseline(&self) -> f64 {
        let cap = self.max_ades_per_report.min(self.n_ades).max(1);
        let mut p = 0.0;
        let mut tail = 1.0;
        for k in 1..cap {
            let pk = 0.5_f64.powi(k as i32);
            p += pk * k as f64;
            tail -= pk;
        }
        (p + tail * cap as f64) / self.n_ades as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_reports == 0 || self.n_drugs == 0 || self.n_ades == 0 {
            return bad("n_reports, n_drugs and n_ades must be positive".into());
        }
        if self.max_drugs_per_report == 0 || self.max_ades_per_report == 0 {
            return bad("per-report caps must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.synonym_rate) {
            return bad(format!("synonym_rate {} outside [0, 1]", self.synonym_rate));
        }
        let b = self.baseline();
        let mut active = HashSet::new();
        let mut lexicon_only = HashSet::new();
        for (c, class) in self.classes.iter().enumerate() {
            if class.members.is_empty() {
                return bad(format!("class {c} has no members"));
            }
            if class.ade >= self.n_ades {
                return bad(format!("class {c} ADE index {} out of range", class.ade));
            }
            if class.lift.is_nan() || class.lift < 1.0 {
                return bad(format!("class {c} lift {} below 1", class.lift));
            }
            if class.lift * b > 1.0 {
                return bad(format!(
                    "class {c}: lift {} x baseline {b:.4} exceeds 1",
                    class.lift
                ));
            }
            for &d in class.members.iter().chain(&class.held_out).chain(&class.decoys) {
                if d >= self.n_drugs {
                    return bad(format!("class {c} drug index {d} out of range"));
                }
            }
            if class.held_out.iter().any(|h| !class.members.contains(h)) {
                return bad(format!("class {c}: held-out drugs must be members"));
            }
            active.extend(class.members.iter().copied());
            lexicon_only.extend(class.decoys.iter().copied());
        }
        if active.intersection(&lexicon_only).next().is_some() {
            return bad("a decoy is also a planted member".into());
        }
        Ok(())
    }
}

pub fn drug_name(i: usize) -> String {
    format!("drug{i:03}")
}

pub fn synonym_name(i: usize) -> String {
    format!("brand{i:03}")
}

pub fn ade_name(i: usize) -> String {
    format!("Event {i:02}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub reports: Vec<Report>,
    pub truth: Vec<ReferencePair>,
    pub lexicon: LexiconGraph,
}

fn report_length(rng: &mut ChaCha8Rng, cap: usize) -> usize {
    let mut k = 1;
    while k < cap && rng.gen_bool(0.5) {
        k += 1;
    }
    k
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let b = spec.baseline();

    // Probability of adding the class ADE to a report holding an active member.
    let top_up: Vec<f64> = spec
        .classes
        .iter()
        .map(|c| if b >= 1.0 { 0.0 } else { (c.lift * b - b) / (1.0 - b) })
        .collect();
    let mut active_in: Vec<Vec<(usize, bool)>> = vec![Vec::new(); spec.n_drugs];
    for (c, class) in spec.classes.iter().enumerate() {
        for &m in &class.members {
            active_in[m].push((c, class.held_out.contains(&m)));
        }
    }

    let drug_cap = spec.max_drugs_per_report.min(spec.n_drugs);
    let ade_cap = spec.max_ades_per_report.min(spec.n_ades);
    let mut reports = Vec::with_capacity(spec.n_reports);
    for r in 0..spec.n_reports {
        let mut report = Report::new(format!("S{r:07}"));
        report.event_date = Some(ReportDate::quarter(2004 + rng.gen_range(0..16), rng.gen_range(1..=4)));
        let n_drugs = report_length(&mut rng, drug_cap);
        let mut triggered = vec![false; spec.classes.len()];
        for (pos, d) in sample(&mut rng, spec.n_drugs, n_drugs).into_iter().enumerate() {
            let synonym = rng.gen_bool(spec.synonym_rate);
            let raw = if synonym { synonym_name(d) } else { drug_name(d) }.to_uppercase();
            let role = if pos == 0 { Role::PrimarySuspect } else { Role::Concomitant };
            report.push_drug(DrugMention::new(&raw, role));
            for &(c, held_out) in &active_in[d] {
                if !held_out || synonym {
                    triggered[c] = true;
                }
            }
        }
        let n_ades = report_length(&mut rng, ade_cap);
        let mut ades: Vec<usize> = sample(&mut rng, spec.n_ades, n_ades).into_vec();
        for (c, class) in spec.classes.iter().enumerate() {
            if triggered[c] && !ades.contains(&class.ade) && rng.gen_bool(top_up[c]) {
                ades.push(class.ade);
            }
        }
        for a in ades {
            report.push_event(&ade_name(a));
        }
        reports.push(report);
    }

    let mut lexicon = LexiconGraph::new();
    for d in 0..spec.n_drugs {
        lexicon.connect(&drug_name(d), &normalize_drugname(&synonym_name(d)));
    }
    for class in &spec.classes {
        let linked: Vec<usize> = class.members.iter().chain(&class.decoys).copied().collect();
        for (i, &x) in linked.iter().enumerate() {
            for &y in &linked[i + 1..] {
                lexicon.connect(&drug_name(x), &drug_name(y));
            }
        }
    }

    let in_any_class: HashSet<usize> = spec
        .classes
        .iter()
        .flat_map(|c| c.members.iter().chain(&c.decoys).copied())
        .collect();
    let background: Vec<usize> = (0..spec.n_drugs).filter(|d| !in_any_class.contains(d)).collect();
    let mut truth = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |truth: &mut Vec<ReferencePair>, d: usize, a: usize, label: Label, group: usize| {
        if seen.insert((d, a)) {
            truth.push(ReferencePair {
                drug: drug_name(d),
                outcome: ade_name(a),
                pts: vec![ade_name(a)],
                label,
                outcome_group: format!("class{group}"),
            });
        }
    };
    for (c, class) in spec.classes.iter().enumerate() {
        for &m in &class.members {
            push(&mut truth, m, class.ade, Label::Positive, c);
        }
        for &d in &class.decoys {
            push(&mut truth, d, class.ade, Label::Negative, c);
        }
        let k = spec.negatives_per_class.min(background.len());
        for i in sample(&mut rng, background.len(), k) {
            push(&mut truth, background[i], class.ade, Label::Negative, c);
        }
    }

    Ok(SynthCorpus {
        reports,
        truth,
        lexicon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(lift: f64, synonym_rate: f64) -> SynthSpec {
        SynthSpec::planted(2000, 40, 12, 2, 4, 1, 1, lift, synonym_rate, 3)
    }

    #[test]
    fn baseline_matches_truncated_geometric() {
        let mut spec = small(1.0, 0.0);
        spec.n_ades = 50;
        // Sum over k < 10 of k 2^-k plus 10 * 2^-9.
        let expect = (0..9).map(|k| (k + 1) as f64 * 0.5_f64.powi(k + 1)).sum::<f64>() + 10.0 * 0.5_f64.powi(9);
        assert!((spec.baseline() - expect / 50.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&small(3.0, 0.3)).unwrap();
        let b = generate(&small(3.0, 0.3)).unwrap();
        assert_eq!(a, b);
        let mut other = small(3.0, 0.3);
        other.seed = 4;
        assert_ne!(generate(&other).unwrap().reports, a.reports);
    }

    #[test]
    fn no_synonyms_when_rate_is_zero() {
        let corpus = generate(&small(3.0, 0.0)).unwrap();
        assert!(corpus
            .reports
            .iter()
            .flat_map(|r| &r.drugs)
            .all(|d| d.normalized_name.starts_with("drug")));
    }

    #[test]
    fn infeasible_lift_is_rejected() {
        let spec = small(20.0, 0.0);
        assert!(matches!(generate(&spec), Err(Error::Config(_))));
        let mut spec = small(3.0, 0.0);
        spec.classes[0].decoys.push(0);
        assert!(spec.validate().is_err());
        let mut spec = small(3.0, 1.5);
        spec.synonym_rate = 1.5;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn truth_and_lexicon_shape() {
        let corpus = generate(&small(3.0, 0.3)).unwrap();
        let pos = corpus.truth.iter().filter(|p| p.label == Label::Positive).count();
        assert_eq!(pos, 8);
        assert_eq!(corpus.truth.len(), 8 + 2 + 20);
        assert!(corpus.lexicon.contains_edge("drug000", "brand000"));
        assert!(corpus.lexicon.contains_edge("drug000", "drug004"));
        assert!(!corpus.lexicon.contains_edge("drug000", "drug005"));
    }
}
