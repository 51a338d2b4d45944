//! Drug lexicon graph built from RxNorm RRF files (RN, RO and SY relations),
//! projected from concepts onto normalized surface strings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::{normalize_drugname, ParseOptions, ParseStats};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptRecord {
    pub rxcui: String,
    pub rxaui: String,
    pub surface: String,
    pub suppressed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationKind {
    /// Narrower.
    Rn,
    /// Other.
    Ro,
    /// Synonymy.
    Sy,
}

impl FromStr for RelationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "RN" => Ok(RelationKind::Rn),
            "RO" => Ok(RelationKind::Ro),
            "SY" => Ok(RelationKind::Sy),
            other => Err(format!("relation `{other}` is not one of RN, RO, SY")),
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationKind::Rn => "RN",
            RelationKind::Ro => "RO",
            RelationKind::Sy => "SY",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationEdge {
    pub cui1: String,
    pub cui2: String,
    pub rel: RelationKind,
}

// RXNCONSO.RRF: RXCUI|LAT|TS|LUI|STT|SUI|ISPREF|RXAUI|SAUI|SCUI|SDUI|SAB|TTY|CODE|STR|SRL|SUPPRESS|CVF|
const CONSO_FIELDS: usize = 18;
const CONSO_RXCUI: usize = 0;
const CONSO_LAT: usize = 1;
const CONSO_RXAUI: usize = 7;
const CONSO_STR: usize = 14;
const CONSO_SUPPRESS: usize = 16;

// RXNREL.RRF: RXCUI1|RXAUI1|STYPE1|REL|RXCUI2|RXAUI2|STYPE2|RELA|RUI|SRUI|SAB|SL|DIR|RG|SUPPRESS|CVF|
const REL_FIELDS: usize = 16;
const REL_RXCUI1: usize = 0;
const REL_RXAUI1: usize = 1;
const REL_REL: usize = 3;
const REL_RXCUI2: usize = 4;
const REL_RXAUI2: usize = 5;

/// Splits an RRF row, tolerating the trailing `|` terminator.
fn rrf_fields(line: &str) -> Vec<&str> {
    let line = line.strip_suffix('|').unwrap_or(line);
    line.split('|').collect()
}

#[derive(Debug, Clone, Default)]
pub struct ParsedRrf {
    pub records: Vec<ConceptRecord>,
    pub edges: Vec<RelationEdge>,
    pub stats: ParseStats,
}

/// Reads concept and relation rows. Suppressed, non-English and
/// empty-surface atoms are dropped, relations outside RN/RO/SY are skipped,
/// and atom-level relations are lifted to their concepts.
pub fn parse_rrf<R1: BufRead, R2: BufRead>(conso: R1, rel: R2, opts: ParseOptions) -> Result<ParsedRrf> {
    let mut stats = ParseStats::default();
    let mut records = Vec::new();
    let mut atom_cui: HashMap<String, String> = HashMap::new();
    for (idx, line) in conso.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        stats.lines += 1;
        let f = rrf_fields(line);
        if f.len() != CONSO_FIELDS {
            let msg = format!("expected {CONSO_FIELDS} fields, found {}", f.len());
            stats_reject(&mut stats, opts, Error::parse("RXNCONSO", idx + 1, msg))?;
            continue;
        }
        if f[CONSO_RXCUI].is_empty() {
            stats_reject(&mut stats, opts, Error::parse("RXNCONSO", idx + 1, "empty RXCUI"))?;
            continue;
        }
        atom_cui.insert(f[CONSO_RXAUI].to_string(), f[CONSO_RXCUI].to_string());
        let suppressed = !matches!(f[CONSO_SUPPRESS], "" | "N");
        let surface = normalize_drugname(f[CONSO_STR]);
        if suppressed || f[CONSO_LAT] != "ENG" || surface.is_empty() {
            continue;
        }
        records.push(ConceptRecord {
            rxcui: f[CONSO_RXCUI].to_string(),
            rxaui: f[CONSO_RXAUI].to_string(),
            surface,
            suppressed,
        });
    }

    let mut edges = Vec::new();
    for (idx, line) in rel.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        stats.lines += 1;
        let f = rrf_fields(line);
        if f.len() != REL_FIELDS {
            let msg = format!("expected {REL_FIELDS} fields, found {}", f.len());
            stats_reject(&mut stats, opts, Error::parse("RXNREL", idx + 1, msg))?;
            continue;
        }
        let Ok(kind) = f[REL_REL].parse::<RelationKind>() else {
            continue;
        };
        let resolve = |cui: &str, aui: &str| -> Option<String> {
            if !cui.is_empty() {
                Some(cui.to_string())
            } else {
                atom_cui.get(aui).cloned()
            }
        };
        let (Some(c1), Some(c2)) = (
            resolve(f[REL_RXCUI1], f[REL_RXAUI1]),
            resolve(f[REL_RXCUI2], f[REL_RXAUI2]),
        ) else {
            stats_reject(&mut stats, opts, Error::parse("RXNREL", idx + 1, "unresolvable concept"))?;
            continue;
        };
        if c1 != c2 {
            edges.push(RelationEdge {
                cui1: c1,
                cui2: c2,
                rel: kind,
            });
        }
    }
    Ok(ParsedRrf { records, edges, stats })
}

fn stats_reject(stats: &mut ParseStats, opts: ParseOptions, err: Error) -> Result<()> {
    if opts.strict {
        return Err(err);
    }
    log::warn!("skipping malformed RRF row: {err}");
    stats.rejects += 1;
    Ok(())
}

/// Symmetric, irreflexive adjacency over normalized drug terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexiconGraph {
    adjacency: BTreeMap<String, BTreeSet<String>>,
}

impl LexiconGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an undirected edge; self-loops and empty terms are ignored.
    pub fn connect(&mut self, a: &str, b: &str) {
        if a == b || a.is_empty() || b.is_empty() {
            return;
        }
        self.adjacency.entry(a.to_string()).or_default().insert(b.to_string());
        self.adjacency.entry(b.to_string()).or_default().insert(a.to_string());
    }

    pub fn neighbors(&self, term: &str) -> impl Iterator<Item = &str> {
        self.adjacency
            .get(term)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn degree(&self, term: &str) -> usize {
        self.adjacency.get(term).map_or(0, BTreeSet::len)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.adjacency.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn contains_edge(&self, a: &str, b: &str) -> bool {
        self.adjacency.get(a).is_some_and(|s| s.contains(b))
    }

    /// One line per term: `term neighbor1 neighbor2 ...`.
    pub fn write_lexicon<W: Write>(&self, mut out: W) -> Result<()> {
        for (term, neighbors) in &self.adjacency {
            write!(out, "{term}")?;
            for n in neighbors {
                write!(out, " {n}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads the lexicon line format. Tokens are taken verbatim (no
    /// character filtering) and the result is symmetrized.
    pub fn read_lexicon<R: BufRead>(source: R) -> Result<Self> {
        let mut graph = LexiconGraph::new();
        for line in source.lines() {
            let line = line?;
            let mut tokens = line.split_whitespace();
            let Some(term) = tokens.next() else {
                continue;
            };
            for n in tokens {
                graph.connect(term, n);
            }
        }
        Ok(graph)
    }
}

/// Projects concept relations onto surfaces: surfaces of one concept are
/// mutually adjacent, and each concept-level edge links every surface of one
/// side to every surface of the other.
pub fn build_graph(records: &[ConceptRecord], edges: &[RelationEdge]) -> LexiconGraph {
    let mut surfaces: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for r in records.iter().filter(|r| !r.suppressed) {
        surfaces.entry(r.rxcui.as_str()).or_default().insert(r.surface.as_str());
    }
    let mut graph = LexiconGraph::new();
    for group in surfaces.values() {
        for a in group {
            for b in group {
                graph.connect(a, b);
            }
        }
    }
    for e in edges {
        if let (Some(left), Some(right)) = (surfaces.get(e.cui1.as_str()), surfaces.get(e.cui2.as_str())) {
            for a in left {
                for b in right {
                    graph.connect(a, b);
                }
            }
        }
    }
    graph
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub vocabulary: usize,
    pub covered: usize,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        if self.vocabulary == 0 {
            0.0
        } else {
            self.covered as f64 / self.vocabulary as f64
        }
    }
}

impl fmt::Display for Coverage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "covered={} vocabulary={} fraction={:.4}",
            self.covered,
            self.vocabulary,
            self.fraction()
        )
    }
}

/// Counts vocabulary terms with at least one in-vocabulary neighbor; only
/// those terms move under retrofitting.
pub fn coverage_report<'a>(graph: &LexiconGraph, vocab: impl IntoIterator<Item = &'a str>) -> Coverage {
    let terms: BTreeSet<&str> = vocab.into_iter().collect();
    let covered = terms
        .iter()
        .filter(|t| graph.neighbors(t).any(|n| terms.contains(n)))
        .count();
    Coverage {
        vocabulary: terms.len(),
        covered,
    }
}
