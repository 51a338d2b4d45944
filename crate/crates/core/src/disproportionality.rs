//! Proportional reporting ratio and reporting odds ratio over the report-level
//! 2x2 table of a drug/ADE pair.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vocab::{GlobalCounts, Vocabulary};

/// Cells of the 2x2 table.
///
/// |              | ADE of interest | other ADEs |
/// |--------------|-----------------|------------|
/// | drug         | a               | b          |
/// | other drugs  | c               | d          |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContingencyCounts {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyCounts {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ContingencyCounts { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

pub fn contingency(
    counts: &GlobalCounts,
    drugs: &Vocabulary,
    ades: &Vocabulary,
    drug: &str,
    ade: &str,
) -> Result<ContingencyCounts> {
    let d = drugs.id(drug).ok_or_else(|| Error::NotFound(format!("drug `{drug}`")))?;
    let e = ades.id(ade).ok_or_else(|| Error::NotFound(format!("ADE `{ade}`")))?;
    Ok(contingency_by_id(counts, d, e))
}

pub fn contingency_by_id(counts: &GlobalCounts, drug: usize, ade: usize) -> ContingencyCounts {
    let a = counts.pair(drug, ade);
    let b = counts.drug_report_count[drug] - a;
    let c = counts.ade_report_count[ade] - a;
    let d = counts.total_reports - a - b - c;
    ContingencyCounts { a, b, c, d }
}

/// Denominator that made a metric undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UndefinedMetric {
    /// `a + b = 0`.
    DrugMarginZero,
    /// `c + d = 0`.
    OtherDrugsMarginZero,
    /// `c = 0`: the comparator proportion or odds is zero.
    CZero,
    BZero,
    DZero,
}

impl fmt::Display for UndefinedMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UndefinedMetric::DrugMarginZero => "a+b = 0",
            UndefinedMetric::OtherDrugsMarginZero => "c+d = 0",
            UndefinedMetric::CZero => "c = 0",
            UndefinedMetric::BZero => "b = 0",
            UndefinedMetric::DZero => "d = 0",
        })
    }
}

impl std::error::Error for UndefinedMetric {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Correction {
    #[default]
    None,
    /// Add 0.5 to every cell (Haldane).
    Haldane,
}

fn cells<T: Real>(t: &ContingencyCounts, correction: Correction) -> [T; 4] {
    let k = match correction {
        Correction::None => 0.0,
        Correction::Haldane => 0.5,
    };
    [t.a, t.b, t.c, t.d].map(|x| T::of(x as f64 + k))
}

/// `(a / (a + b)) / (c / (c + d))`.
pub fn prr<T: Real>(t: &ContingencyCounts) -> std::result::Result<T, UndefinedMetric> {
    prr_with(t, Correction::None)
}

pub fn prr_with<T: Real>(t: &ContingencyCounts, correction: Correction) -> std::result::Result<T, UndefinedMetric> {
    let [a, b, c, d] = cells::<T>(t, correction);
    if a + b == T::zero() {
        return Err(UndefinedMetric::DrugMarginZero);
    }
    if c + d == T::zero() {
        return Err(UndefinedMetric::OtherDrugsMarginZero);
    }
    if c == T::zero() {
        return Err(UndefinedMetric::CZero);
    }
    Ok((a / (a + b)) / (c / (c + d)))
}

/// `(a / b) / (c / d)`; undefined whenever `b`, `c` or `d` is zero.
pub fn ror<T: Real>(t: &ContingencyCounts) -> std::result::Result<T, UndefinedMetric> {
    ror_with(t, Correction::None)
}

pub fn ror_with<T: Real>(t: &ContingencyCounts, correction: Correction) -> std::result::Result<T, UndefinedMetric> {
    let [a, b, c, d] = cells::<T>(t, correction);
    if b == T::zero() {
        return Err(UndefinedMetric::BZero);
    }
    if c == T::zero() {
        return Err(UndefinedMetric::CZero);
    }
    if d == T::zero() {
        return Err(UndefinedMetric::DZero);
    }
    Ok((a / b) / (c / d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Prr,
    Ror,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Prr => "prr",
            Metric::Ror => "ror",
        }
    }

    pub fn compute<T: Real>(self, t: &ContingencyCounts, correction: Correction) -> std::result::Result<T, UndefinedMetric> {
        match self {
            Metric::Prr => prr_with(t, correction),
            Metric::Ror => ror_with(t, correction),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "prr" => Ok(Metric::Prr),
            "ror" => Ok(Metric::Ror),
            other => Err(format!("unknown metric `{other}` (prr or ror)")),
        }
    }
}

/// `drug<TAB>ade<TAB>metric<TAB>value|UNDEF`.
pub fn write_score_line<W: Write, T: Real>(
    mut out: W,
    drug: &str,
    ade: &str,
    metric: Metric,
    value: std::result::Result<T, UndefinedMetric>,
) -> Result<()> {
    match value {
        Ok(v) => writeln!(out, "{drug}\t{ade}\t{}\t{v}", metric.name())?,
        Err(_) => writeln!(out, "{drug}\t{ade}\t{}\tUNDEF", metric.name())?,
    }
    Ok(())
}
