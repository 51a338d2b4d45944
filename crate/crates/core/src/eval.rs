//! Reference-set scoring, rank-based AUC, multi-edition aggregation and the
//! beta sweep over retrofitting variants.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::disproportionality::{contingency_by_id, Correction, Metric};
use crate::embedding::{EmbeddingSpace, VectorTable};
use crate::error::{Error, Result};
use crate::ingest::normalize_drugname;
use crate::lexicon::LexiconGraph;
use crate::retrofit::{retrofit, RetrofitConfig};
use crate::scalar::{dot, sigmoid, Real};
use crate::vocab::{GlobalCounts, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Positive,
    Negative,
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" | "1" | "true" => Ok(Label::Positive),
            "negative" | "neg" | "0" | "false" => Ok(Label::Negative),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// One labeled control. `pts` holds the candidate preferred terms the
/// outcome maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferencePair {
    pub drug: String,
    pub outcome: String,
    pub pts: Vec<String>,
    pub label: Label,
    pub outcome_group: String,
}

/// Reads `outcome<TAB>pt` rows; an outcome may map to several PTs.
pub fn load_mapping<R: BufRead>(source: R) -> Result<HashMap<String, Vec<String>>> {
    let mut map: HashMap<String, Vec<String>> = HashMap::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((outcome, pt)) = line.split_once('\t') else {
            return Err(Error::parse("outcome mapping", idx + 1, "expected outcome<TAB>pt"));
        };
        let pts = map.entry(outcome.to_string()).or_default();
        if !pts.iter().any(|p| p == pt) {
            pts.push(pt.to_string());
        }
    }
    Ok(map)
}

/// Reads `drug<TAB>outcome<TAB>label<TAB>group` rows. Lines starting with
/// `#` are comments and are skipped, as is a `drug<TAB>outcome...`
/// header. Outcomes absent from `mapping` are used verbatim as their PT.
pub fn load_reference<R: BufRead>(
    source: R,
    mapping: Option<&HashMap<String, Vec<String>>>,
) -> Result<Vec<ReferencePair>> {
    let mut pairs = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: String| Error::parse("reference set", idx + 1, m);
        let fields: Vec<&str> = line.split('\t').collect();
        let [drug, outcome, label, group] = fields[..] else {
            return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
        };
        if pairs.is_empty() && drug.eq_ignore_ascii_case("drug") && label.eq_ignore_ascii_case("label") {
            continue;
        }
        let label: Label = label.parse().map_err(err)?;
        if group.trim().is_empty() {
            return Err(err("empty outcome group".into()));
        }
        let drug = normalize_drugname(drug);
        if !seen.insert((drug.clone(), outcome.to_string())) {
            return Err(err(format!("duplicate pair ({drug}, {outcome})")));
        }
        let pts = mapping
            .and_then(|m| m.get(outcome).cloned())
            .unwrap_or_else(|| vec![outcome.to_string()]);
        pairs.push(ReferencePair {
            drug,
            outcome: outcome.to_string(),
            pts,
            label,
            outcome_group: group.to_string(),
        });
    }
    Ok(pairs)
}

/// Writes the reference TSV format read by [`load_reference`].
pub fn write_reference<W: Write>(mut out: W, pairs: &[ReferencePair]) -> Result<()> {
    for p in pairs {
        let label = match p.label {
            Label::Positive => "positive",
            Label::Negative => "negative",
        };
        writeln!(out, "{}\t{}\t{label}\t{}", p.drug, p.outcome, p.outcome_group)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OovPolicy {
    /// Drop the pair and count it as missing.
    #[default]
    Exclude,
    /// Give the pair the lowest observed score so it ranks last.
    Worst,
}

impl FromStr for OovPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exclude" => Ok(OovPolicy::Exclude),
            "worst" => Ok(OovPolicy::Worst),
            other => Err(format!("unknown OOV policy `{other}` (exclude or worst)")),
        }
    }
}

/// How candidate-PT scores of one outcome are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Aggregate {
    #[default]
    Max,
    Mean,
}

impl FromStr for Aggregate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max" => Ok(Aggregate::Max),
            "mean" => Ok(Aggregate::Mean),
            other => Err(format!("unknown aggregate `{other}` (max or mean)")),
        }
    }
}

/// Scores one (drug, PT) pair; `None` when a term is out of vocabulary or
/// the metric is undefined.
pub trait PairScorer: Sync {
    fn method(&self) -> &str;
    fn score(&self, drug: &str, pt: &str) -> Option<f64>;
}

/// `sigmoid(ade . drug)` over an ADE table and a drug table.
pub struct EmbeddingScorer<'a, T> {
    pub ades: &'a VectorTable<T>,
    pub drugs: &'a VectorTable<T>,
    pub method: String,
}

impl<'a, T: Real> EmbeddingScorer<'a, T> {
    pub fn new(space: &'a EmbeddingSpace<T>) -> Self {
        EmbeddingScorer {
            ades: &space.ades,
            drugs: &space.drugs,
            method: "aer2vec".into(),
        }
    }
}

impl<T: Real> PairScorer for EmbeddingScorer<'_, T> {
    fn method(&self) -> &str {
        &self.method
    }

    fn score(&self, drug: &str, pt: &str) -> Option<f64> {
        let a = self.ades.get(pt)?;
        let d = self.drugs.get(drug)?;
        Some(sigmoid(dot(a, d)).as_f64())
    }
}

/// PRR or ROR from global counts.
pub struct CountScorer<'a> {
    pub counts: &'a GlobalCounts,
    pub drugs: &'a Vocabulary,
    pub ades: &'a Vocabulary,
    pub metric: Metric,
    pub correction: Correction,
}

impl PairScorer for CountScorer<'_> {
    fn method(&self) -> &str {
        self.metric.name()
    }

    fn score(&self, drug: &str, pt: &str) -> Option<f64> {
        let d = self.drugs.id(drug)?;
        let a = self.ades.id(pt)?;
        let t = contingency_by_id(self.counts, d, a);
        self.metric.compute::<f64>(&t, self.correction).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub pair: ReferencePair,
    pub score: Option<f64>,
    pub method: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    pub pairs: Vec<ScoredPair>,
    pub n_missing: usize,
}

impl ScoredSet {
    pub fn n_scored(&self) -> usize {
        self.pairs.len() - self.n_missing
    }
}

pub fn score_reference<S: PairScorer + ?Sized>(
    pairs: &[ReferencePair],
    scorer: &S,
    policy: OovPolicy,
    aggregate: Aggregate,
    seed: Option<u64>,
) -> ScoredSet {
    let mut scored: Vec<ScoredPair> = pairs
        .iter()
        .map(|pair| {
            let candidates: Vec<f64> = pair
                .pts
                .iter()
                .filter_map(|pt| scorer.score(&pair.drug, pt))
                .filter(|s| s.is_finite())
                .collect();
            let score = if candidates.is_empty() {
                None
            } else {
                Some(match aggregate {
                    Aggregate::Max => candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    Aggregate::Mean => candidates.iter().sum::<f64>() / candidates.len() as f64,
                })
            };
            ScoredPair {
                pair: pair.clone(),
                score,
                method: scorer.method().to_string(),
                seed,
            }
        })
        .collect();
    if policy == OovPolicy::Worst {
        let worst = scored.iter().filter_map(|p| p.score).fold(f64::INFINITY, f64::min);
        if worst.is_finite() {
            for p in scored.iter_mut().filter(|p| p.score.is_none()) {
                p.score = Some(worst);
            }
        }
    }
    let n_missing = scored.iter().filter(|p| p.score.is_none()).count();
    ScoredSet {
        pairs: scored,
        n_missing,
    }
}

/// Mann-Whitney AUC: the fraction of positive/negative pairs in which the
/// positive scores higher, ties counting one half. Computed from midranks
/// with integer rank sums.
pub fn auc_from_scores<T: Real>(positives: &[T], negatives: &[T]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Undefined("AUC needs at least one positive and one negative".into()));
    }
    if positives.iter().chain(negatives).any(|s| !s.is_finite()) {
        return Err(Error::Undefined("AUC over non-finite scores".into()));
    }
    let mut all: Vec<(T, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
    // Twice the positive rank sum, so midranks stay integral.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < all.len() {
        let mut end = start;
        while end + 1 < all.len() && all[end + 1].0 == all[start].0 {
            end += 1;
        }
        let twice_midrank = (start + end + 2) as u128;
        let pos_in_group = all[start..=end].iter().filter(|(_, p)| *p).count() as u128;
        twice_rank_sum += twice_midrank * pos_in_group;
        start = end + 1;
    }
    let np = positives.len() as u128;
    let nn = negatives.len() as u128;
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok(twice_u as f64 / (2 * np * nn) as f64)
}

/// AUC over the defined scores of a scored set.
pub fn auc(scored: &[ScoredPair]) -> Result<f64> {
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for p in scored {
        if let Some(s) = p.score {
            match p.pair.label {
                Label::Positive => pos.push(s),
                Label::Negative => neg.push(s),
            }
        }
    }
    auc_from_scores(&pos, &neg)
}

/// Per-group AUC; groups lacking either class are omitted.
pub fn auc_by_group(scored: &[ScoredPair]) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<&str, Vec<ScoredPair>> = BTreeMap::new();
    for p in scored {
        groups.entry(p.pair.outcome_group.as_str()).or_default().push(p.clone());
    }
    groups
        .into_iter()
        .filter_map(|(g, ps)| auc(&ps).ok().map(|a| (g.to_string(), a)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub auc_mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for one edition.
    pub auc_std: f64,
    pub n_seeds: usize,
    pub n_scored: usize,
    pub n_missing: usize,
    pub per_outcome: BTreeMap<String, f64>,
    pub per_edition: Vec<f64>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregates the scored sets of several editions of one configuration.
pub fn summarize(editions: &[ScoredSet]) -> Result<EvalSummary> {
    if editions.is_empty() {
        return Err(Error::Undefined("no editions to summarize".into()));
    }
    let per_edition = editions
        .iter()
        .map(|e| auc(&e.pairs))
        .collect::<Result<Vec<f64>>>()?;
    let (auc_mean, auc_std) = mean_std(&per_edition);
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for e in editions {
        for (g, a) in auc_by_group(&e.pairs) {
            groups.entry(g).or_default().push(a);
        }
    }
    let n_missing = editions.iter().map(|e| e.n_missing).max().unwrap_or(0);
    Ok(EvalSummary {
        auc_mean,
        auc_std,
        n_seeds: editions.len(),
        n_scored: editions[0].pairs.len() - n_missing,
        n_missing,
        per_outcome: groups.into_iter().map(|(g, v)| (g, mean_std(&v).0)).collect(),
        per_edition,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Retrofitting as configured (normalization per config).
    Plain,
    /// Retrofitting followed by magnitude restoration.
    Rescaled,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Rescaled => "rescaled",
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" => Ok(Variant::Plain),
            "rescaled" => Ok(Variant::Rescaled),
            other => Err(format!("unknown variant `{other}` (plain or rescaled)")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `start:stop:step` grid, inclusive of `stop`, values rounded to 10
/// decimals so 0.1 steps print cleanly.
pub fn beta_grid(spec: &str) -> std::result::Result<Vec<f64>, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad number `{s}` in grid `{spec}`"));
    if spec.contains(',') {
        return spec.split(',').map(num).collect();
    }
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(format!("grid `{spec}` needs step > 0 and stop >= start"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n)
                .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
                .collect())
        }
        _ => Err(format!("grid `{spec}` is not start:stop:step, a list or a single value")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig<T> {
    pub betas: Vec<T>,
    pub variants: Vec<Variant>,
    /// Iterations, tolerance, normalization and weighting; alpha/beta and
    /// the rescale flag are set per grid point.
    pub retrofit: RetrofitConfig<T>,
    pub policy: OovPolicy,
    pub aggregate: Aggregate,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub trainset: String,
    pub refset: String,
    pub method: String,
    pub variant: Option<Variant>,
    pub beta: Option<f64>,
    pub summary: EvalSummary,
}

/// Retrofits every edition at every (variant, beta), scores each reference
/// set and aggregates AUC across editions. The first rows per reference set
/// are the unretrofitted editions (`method = aer2vec`).
pub fn sweep<T: Real>(
    trainset: &str,
    editions: &[EmbeddingSpace<T>],
    graph: &LexiconGraph,
    refsets: &[(String, Vec<ReferencePair>)],
    config: &SweepConfig<T>,
) -> Result<Vec<SweepRow>> {
    if editions.is_empty() {
        return Err(Error::Config("sweep needs at least one trained edition".into()));
    }
    let mut tasks: Vec<(Variant, T)> = Vec::new();
    for &variant in &config.variants {
        for &beta in &config.betas {
            tasks.push((variant, beta));
        }
    }
    let run_task = |&(variant, beta): &(Variant, T)| -> Result<Vec<Vec<ScoredSet>>> {
        let mut rc = config.retrofit;
        rc.alpha = T::one() - beta;
        rc.beta = beta;
        rc.rescale_after = variant == Variant::Rescaled;
        let mut per_ref: Vec<Vec<ScoredSet>> = vec![Vec::new(); refsets.len()];
        for space in editions {
            let fitted = retrofit(&space.drugs, graph, &rc)?;
            let scorer = EmbeddingScorer {
                ades: &space.ades,
                drugs: &fitted.drug_vectors,
                method: "retrofit".into(),
            };
            for (k, (_, pairs)) in refsets.iter().enumerate() {
                per_ref[k].push(score_reference(pairs, &scorer, config.policy, config.aggregate, Some(space.seed)));
            }
        }
        Ok(per_ref)
    };
    let results: Vec<Result<Vec<Vec<ScoredSet>>>> = if config.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| tasks.par_iter().map(run_task).collect())
    } else {
        tasks.iter().map(run_task).collect()
    };

    let mut rows = Vec::new();
    for (refname, pairs) in refsets {
        let base: Vec<ScoredSet> = editions
            .iter()
            .map(|s| score_reference(pairs, &EmbeddingScorer::new(s), config.policy, config.aggregate, Some(s.seed)))
            .collect();
        rows.push(SweepRow {
            trainset: trainset.to_string(),
            refset: refname.clone(),
            method: "aer2vec".into(),
            variant: None,
            beta: None,
            summary: summarize(&base)?,
        });
    }
    for ((variant, beta), result) in tasks.iter().zip(results) {
        let per_ref = result?;
        for (k, sets) in per_ref.iter().enumerate() {
            rows.push(SweepRow {
                trainset: trainset.to_string(),
                refset: refsets[k].0.clone(),
                method: "retrofit".into(),
                variant: Some(*variant),
                beta: Some(beta.as_f64()),
                summary: summarize(sets)?,
            });
        }
    }
    rows.sort_by(|a, b| {
        (a.refset.as_str(), a.method != "aer2vec", a.variant, a.beta.map(|x| (x * 1e10).round() as i64))
            .cmp(&(b.refset.as_str(), b.method != "aer2vec", b.variant, b.beta.map(|x| (x * 1e10).round() as i64)))
    });
    Ok(rows)
}

/// PRR/ROR rows for one training subset.
#[allow(clippy::too_many_arguments)]
pub fn baseline_rows(
    trainset: &str,
    counts: &GlobalCounts,
    drugs: &Vocabulary,
    ades: &Vocabulary,
    refsets: &[(String, Vec<ReferencePair>)],
    metrics: &[Metric],
    correction: Correction,
    policy: OovPolicy,
    aggregate: Aggregate,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (refname, pairs) in refsets {
        for &metric in metrics {
            let scorer = CountScorer {
                counts,
                drugs,
                ades,
                metric,
                correction,
            };
            let set = score_reference(pairs, &scorer, policy, aggregate, None);
            rows.push(SweepRow {
                trainset: trainset.to_string(),
                refset: refname.clone(),
                method: metric.name().to_string(),
                variant: None,
                beta: None,
                summary: summarize(std::slice::from_ref(&set))?,
            });
        }
    }
    Ok(rows)
}

pub const RESULTS_HEADER: &str = "trainset\trefset\tmethod\tvariant\tbeta\tauc_mean\tauc_std\tn_seeds\tn_missing";

/// Results TSV with a header line; `-` marks a missing variant or beta.
pub fn write_results<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.trainset,
            r.refset,
            r.method,
            r.variant.map_or("-", Variant::name),
            r.beta.map_or_else(|| "-".to_string(), |b| b.to_string()),
            r.summary.auc_mean,
            r.summary.auc_std,
            r.summary.n_seeds,
            r.summary.n_missing
        )?;
    }
    Ok(())
}

/// Per-edition AUCs, one line per (row, edition), for external significance
/// testing.
pub fn write_editions<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "trainset\trefset\tmethod\tvariant\tbeta\tedition\tauc")?;
    for r in rows {
        for (k, a) in r.summary.per_edition.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{k}\t{a}",
                r.trainset,
                r.refset,
                r.method,
                r.variant.map_or("-", Variant::name),
                r.beta.map_or_else(|| "-".to_string(), |b| b.to_string()),
            )?;
        }
    }
    Ok(())
}

/// Per-outcome-group mean AUCs.
pub fn write_per_outcome<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "trainset\trefset\tmethod\tvariant\tbeta\tgroup\tauc_mean")?;
    for r in rows {
        for (g, a) in &r.summary.per_outcome {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{g}\t{a}",
                r.trainset,
                r.refset,
                r.method,
                r.variant.map_or("-", Variant::name),
                r.beta.map_or_else(|| "-".to_string(), |b| b.to_string()),
            )?;
        }
    }
    Ok(())
}

/// Beta curve of one (trainset, refset, variant): `beta<TAB>auc_mean<TAB>auc_std`.
pub fn write_curve<W: Write>(mut out: W, rows: &[SweepRow], trainset: &str, refset: &str, variant: Variant) -> Result<()> {
    writeln!(out, "beta\tauc_mean\tauc_std")?;
    for r in rows.iter().filter(|r| {
        r.trainset == trainset && r.refset == refset && r.variant == Some(variant) && r.beta.is_some()
    }) {
        writeln!(out, "{}\t{}\t{}", r.beta.unwrap_or_default(), r.summary.auc_mean, r.summary.auc_std)?;
    }
    Ok(())
}

/// Reads a scored-pair file `drug<TAB>ade<TAB>label<TAB>score|UNDEF` and
/// returns its AUC over defined scores.
pub fn auc_of_score_file<R: BufRead>(source: R) -> Result<f64> {
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let err = |m: String| Error::parse("score file", idx + 1, m);
        let [_, _, label, score] = fields[..] else {
            return Err(err("expected drug<TAB>ade<TAB>label<TAB>score".into()));
        };
        if idx == 0 && label.eq_ignore_ascii_case("label") {
            continue;
        }
        let label: Label = label.parse().map_err(err)?;
        if score == "UNDEF" || score == "NA" {
            continue;
        }
        let s: f64 = score.parse().map_err(|_| err(format!("bad score `{score}`")))?;
        match label {
            Label::Positive => pos.push(s),
            Label::Negative => neg.push(s),
        }
    }
    auc_from_scores(&pos, &neg)
}
