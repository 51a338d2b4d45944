//! Drug and ADE vocabularies, report-level co-occurrence events and the
//! global counts behind the 2x2 disproportionality tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::ingest::Report;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    frequency: Vec<u64>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from `(term, frequency)` pairs in id order.
    pub fn from_counts<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::new();
        for (term, freq) in entries {
            let term = term.into();
            if freq == 0 {
                return Err(Error::Config(format!("term `{term}` has zero frequency")));
            }
            if vocab.index.contains_key(&term) {
                return Err(Error::Config(format!("duplicate vocabulary term `{term}`")));
            }
            vocab.index.insert(term.clone(), vocab.terms.len());
            vocab.terms.push(term);
            vocab.frequency.push(freq);
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn frequency(&self, id: usize) -> u64 {
        self.frequency[id]
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequency
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    /// `term<TAB>id<TAB>frequency`, one line per term in id order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (id, (term, freq)) in self.terms.iter().zip(&self.frequency).enumerate() {
            writeln!(out, "{term}\t{id}\t{freq}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(source: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| Error::parse("vocabulary TSV", idx + 1, m);
            let mut parts = line.split('\t');
            let (Some(term), Some(id), Some(freq), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(err("expected term<TAB>id<TAB>frequency"));
            };
            let id: usize = id.parse().map_err(|_| err("bad id"))?;
            if id != entries.len() {
                return Err(err("ids must be dense and in order"));
            }
            let freq: u64 = freq.parse().map_err(|_| err("bad frequency"))?;
            entries.push((term.to_string(), freq));
        }
        Vocabulary::from_counts(entries)
    }
}

/// Counts each drug and ADE once per report and keeps terms seen in at least
/// `min_count` reports. Ids follow first appearance in the input.
pub fn build_vocabularies<'a, I>(reports: I, min_count: u64) -> Result<(Vocabulary, Vocabulary)>
where
    I: IntoIterator<Item = &'a Report>,
{
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut drugs: Vec<(String, u64)> = Vec::new();
    let mut drug_pos: HashMap<String, usize> = HashMap::new();
    let mut ades: Vec<(String, u64)> = Vec::new();
    let mut ade_pos: HashMap<String, usize> = HashMap::new();

    fn bump(list: &mut Vec<(String, u64)>, pos: &mut HashMap<String, usize>, term: &str) {
        match pos.get(term) {
            Some(&i) => list[i].1 += 1,
            None => {
                pos.insert(term.to_string(), list.len());
                list.push((term.to_string(), 1));
            }
        }
    }

    for report in reports {
        for drug in report.unique_drugs() {
            bump(&mut drugs, &mut drug_pos, drug);
        }
        let mut seen = HashSet::new();
        for pt in &report.adverse_events {
            if seen.insert(pt.as_str()) {
                bump(&mut ades, &mut ade_pos, pt);
            }
        }
    }
    let keep = |list: Vec<(String, u64)>| {
        Vocabulary::from_counts(list.into_iter().filter(|(_, f)| *f >= min_count))
    };
    Ok((keep(drugs)?, keep(ades)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CooccurrenceEvent<'a> {
    pub ade_id: usize,
    pub drug_id: usize,
    pub report_id: &'a str,
}

fn report_ids(report: &Report, drugs: &Vocabulary, ades: &Vocabulary) -> (Vec<usize>, Vec<usize>) {
    let mut drug_ids: Vec<usize> = Vec::new();
    for name in report.unique_drugs() {
        if let Some(id) = drugs.id(name) {
            drug_ids.push(id);
        }
    }
    let mut ade_ids: Vec<usize> = Vec::new();
    for pt in &report.adverse_events {
        if let Some(id) = ades.id(pt) {
            if !ade_ids.contains(&id) {
                ade_ids.push(id);
            }
        }
    }
    (drug_ids, ade_ids)
}

/// Full {ADE} x {drug} cross product of each report, out-of-vocabulary
/// mentions skipped, pairs deduplicated within a report.
pub fn emit_events<'a, I>(
    reports: I,
    drugs: &'a Vocabulary,
    ades: &'a Vocabulary,
) -> impl Iterator<Item = CooccurrenceEvent<'a>> + 'a
where
    I: IntoIterator<Item = &'a Report>,
    I::IntoIter: 'a,
{
    reports.into_iter().flat_map(move |report| {
        let (drug_ids, ade_ids) = report_ids(report, drugs, ades);
        let id = report.report_id.as_str();
        ade_ids.into_iter().flat_map(move |ade_id| {
            drug_ids.clone().into_iter().map(move |drug_id| CooccurrenceEvent {
                ade_id,
                drug_id,
                report_id: id,
            })
        })
    })
}

/// Report-level counts. A report contributes at most once to any cell, and
/// only reports with at least one in-vocabulary drug and ADE are counted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalCounts {
    pub pair_count: HashMap<(usize, usize), u64>,
    pub drug_report_count: Vec<u64>,
    pub ade_report_count: Vec<u64>,
    pub total_reports: u64,
}

impl GlobalCounts {
    pub fn empty(n_drugs: usize, n_ades: usize) -> Self {
        GlobalCounts {
            pair_count: HashMap::new(),
            drug_report_count: vec![0; n_drugs],
            ade_report_count: vec![0; n_ades],
            total_reports: 0,
        }
    }

    pub fn pair(&self, drug_id: usize, ade_id: usize) -> u64 {
        self.pair_count.get(&(drug_id, ade_id)).copied().unwrap_or(0)
    }

    fn add_report(&mut self, drug_ids: &[usize], ade_ids: &[usize]) {
        if drug_ids.is_empty() || ade_ids.is_empty() {
            return;
        }
        self.total_reports += 1;
        for &d in drug_ids {
            self.drug_report_count[d] += 1;
        }
        for &a in ade_ids {
            self.ade_report_count[a] += 1;
        }
        for &d in drug_ids {
            for &a in ade_ids {
                *self.pair_count.entry((d, a)).or_insert(0) += 1;
            }
        }
    }

    /// Adds the counts of a disjoint corpus shard.
    pub fn merge(&mut self, other: &GlobalCounts) -> Result<()> {
        if self.drug_report_count.len() != other.drug_report_count.len()
            || self.ade_report_count.len() != other.ade_report_count.len()
        {
            return Err(Error::Config("cannot merge counts over different vocabularies".into()));
        }
        self.total_reports += other.total_reports;
        for (mine, theirs) in self.drug_report_count.iter_mut().zip(&other.drug_report_count) {
            *mine += theirs;
        }
        for (mine, theirs) in self.ade_report_count.iter_mut().zip(&other.ade_report_count) {
            *mine += theirs;
        }
        for (&key, &count) in &other.pair_count {
            *self.pair_count.entry(key).or_insert(0) += count;
        }
        Ok(())
    }

    /// Tagged TSV: `total`, `drug`, `ade` and `pair` lines keyed by term.
    pub fn write_tsv<W: Write>(&self, mut out: W, drugs: &Vocabulary, ades: &Vocabulary) -> Result<()> {
        writeln!(out, "total\t{}", self.total_reports)?;
        for (id, c) in self.drug_report_count.iter().enumerate() {
            writeln!(out, "drug\t{}\t{c}", drugs.term(id))?;
        }
        for (id, c) in self.ade_report_count.iter().enumerate() {
            writeln!(out, "ade\t{}\t{c}", ades.term(id))?;
        }
        let sorted: BTreeMap<_, _> = self.pair_count.iter().collect();
        for (&(d, a), c) in sorted {
            writeln!(out, "pair\t{}\t{}\t{c}", drugs.term(d), ades.term(a))?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(source: R, drugs: &Vocabulary, ades: &Vocabulary) -> Result<Self> {
        let mut counts = GlobalCounts::empty(drugs.len(), ades.len());
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse("counts TSV", idx + 1, m);
            let fields: Vec<&str> = line.split('\t').collect();
            let num = |s: &str| s.parse::<u64>().map_err(|_| err(format!("bad count `{s}`")));
            let lookup = |v: &Vocabulary, t: &str| {
                v.id(t).ok_or_else(|| err(format!("term `{t}` not in vocabulary")))
            };
            match fields.as_slice() {
                ["total", n] => counts.total_reports = num(n)?,
                ["drug", t, n] => counts.drug_report_count[lookup(drugs, t)?] = num(n)?,
                ["ade", t, n] => counts.ade_report_count[lookup(ades, t)?] = num(n)?,
                ["pair", d, a, n] => {
                    counts.pair_count.insert((lookup(drugs, d)?, lookup(ades, a)?), num(n)?);
                }
                _ => return Err(err(format!("unrecognized line `{line}`"))),
            }
        }
        Ok(counts)
    }
}

/// Accumulates counts directly from reports.
pub fn accumulate_counts<'a, I>(reports: I, drugs: &Vocabulary, ades: &Vocabulary) -> GlobalCounts
where
    I: IntoIterator<Item = &'a Report>,
{
    let mut counts = GlobalCounts::empty(drugs.len(), ades.len());
    for report in reports {
        let (d, a) = report_ids(report, drugs, ades);
        counts.add_report(&d, &a);
    }
    counts
}

/// Accumulates counts from an event stream, grouping events by report id.
pub fn accumulate_event_counts<'a, I>(events: I, n_drugs: usize, n_ades: usize) -> GlobalCounts
where
    I: IntoIterator<Item = CooccurrenceEvent<'a>>,
{
    let mut per_report: indexmap::IndexMap<&str, (Vec<usize>, Vec<usize>)> = indexmap::IndexMap::new();
    for e in events {
        let (drugs, ades) = per_report.entry(e.report_id).or_default();
        if !drugs.contains(&e.drug_id) {
            drugs.push(e.drug_id);
        }
        if !ades.contains(&e.ade_id) {
            ades.push(e.ade_id);
        }
    }
    let mut counts = GlobalCounts::empty(n_drugs, n_ades);
    for (drugs, ades) in per_report.values() {
        counts.add_report(drugs, ades);
    }
    counts
}
