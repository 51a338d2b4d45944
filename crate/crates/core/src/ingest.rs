//! Spontaneous-report ingestion: drug-name normalization, FAERS quarterly
//! ASCII and canonical TSV readers, and role/date filtering.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Lowercases, collapses whitespace runs to `_` and strips trailing
/// characters outside `[a-z0-9_]`. Leading and trailing whitespace is
/// trimmed first so padded fixed-width exports do not end in `_`.
pub fn normalize_drugname(raw: &str) -> String {
    let lowered = raw.trim().to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    let mut in_space = false;
    for ch in lowered.chars() {
        if ch.is_whitespace() {
            if !in_space {
                out.push('_');
            }
            in_space = true;
        } else {
            out.push(ch);
            in_space = false;
        }
    }
    while let Some(last) = out.chars().next_back() {
        if last.is_ascii_lowercase() || last.is_ascii_digit() || last == '_' {
            break;
        }
        out.pop();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    PrimarySuspect,
    SecondarySuspect,
    Concomitant,
    Interacting,
}

impl Role {
    pub fn code(self) -> &'static str {
        match self {
            Role::PrimarySuspect => "PS",
            Role::SecondarySuspect => "SS",
            Role::Concomitant => "C",
            Role::Interacting => "I",
        }
    }

    /// Parses a FAERS role code; `None` for anything outside PS/SS/C/I.
    pub fn from_code(code: &str) -> Option<Role> {
        match code.trim().to_ascii_uppercase().as_str() {
            "PS" => Some(Role::PrimarySuspect),
            "SS" => Some(Role::SecondarySuspect),
            "C" => Some(Role::Concomitant),
            "I" => Some(Role::Interacting),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrugMention {
    pub raw_name: String,
    pub normalized_name: String,
    pub role: Role,
}

impl DrugMention {
    pub fn new(raw_name: &str, role: Role) -> Self {
        DrugMention {
            raw_name: raw_name.to_string(),
            normalized_name: normalize_drugname(raw_name),
            role,
        }
    }
}

/// Report date at quarter precision; the quarter may be unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReportDate {
    pub year: u16,
    pub quarter: Option<u8>,
}

impl ReportDate {
    pub fn year(year: u16) -> Self {
        ReportDate {
            year,
            quarter: None,
        }
    }

    pub fn quarter(year: u16, quarter: u8) -> Self {
        ReportDate {
            year,
            quarter: Some(quarter),
        }
    }

    /// Parses FAERS `event_dt` values: `YYYYMMDD`, `YYYYMM` or `YYYY`.
    pub fn from_faers(value: &str) -> Option<Self> {
        let value = value.trim();
        if !value.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let year: u16 = value.get(0..4)?.parse().ok()?;
        match value.len() {
            4 => Some(ReportDate::year(year)),
            6 | 8 => {
                let month: u8 = value[4..6].parse().ok()?;
                if !(1..=12).contains(&month) {
                    return None;
                }
                Some(ReportDate::quarter(year, (month - 1) / 3 + 1))
            }
            _ => None,
        }
    }

    /// True when this date falls strictly after `cutoff`. An unknown quarter
    /// is treated as lying within its year.
    pub fn is_after(&self, cutoff: &ReportDate) -> bool {
        if self.year != cutoff.year {
            return self.year > cutoff.year;
        }
        matches!((self.quarter, cutoff.quarter), (Some(q), Some(c)) if q > c)
    }
}

impl FromStr for ReportDate {
    type Err = String;

    /// Accepts `YYYY` or `YYYYQn`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("invalid date `{s}` (expected YYYY or YYYYQn)");
        let (year, quarter) = match s.find(['Q', 'q']) {
            Some(pos) => (&s[..pos], Some(&s[pos + 1..])),
            None => (s, None),
        };
        if year.len() != 4 || !year.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let year: u16 = year.parse().map_err(|_| bad())?;
        match quarter {
            None => Ok(ReportDate::year(year)),
            Some(q) => match q.as_bytes() {
                [d @ b'1'..=b'4'] => Ok(ReportDate::quarter(year, d - b'0')),
                _ => Err(bad()),
            },
        }
    }
}

impl fmt::Display for ReportDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.quarter {
            Some(q) => write!(f, "{:04}Q{}", self.year, q),
            None => write!(f, "{:04}", self.year),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub report_id: String,
    pub event_date: Option<ReportDate>,
    pub drugs: Vec<DrugMention>,
    /// MedDRA preferred terms, verbatim.
    pub adverse_events: Vec<String>,
}

impl Report {
    pub fn new(report_id: impl Into<String>) -> Self {
        Report {
            report_id: report_id.into(),
            event_date: None,
            drugs: Vec::new(),
            adverse_events: Vec::new(),
        }
    }

    /// Adds a mention unless its normalized name is empty or the same
    /// (name, role) is already present.
    pub fn push_drug(&mut self, mention: DrugMention) {
        if mention.normalized_name.is_empty() {
            return;
        }
        let dup = self.drugs.iter().any(|d| {
            d.normalized_name == mention.normalized_name && d.role == mention.role
        });
        if !dup {
            self.drugs.push(mention);
        }
    }

    pub fn push_event(&mut self, pt: &str) {
        if pt.is_empty() || self.adverse_events.iter().any(|e| e == pt) {
            return;
        }
        self.adverse_events.push(pt.to_string());
    }

    fn absorb(&mut self, other: Report) {
        if self.event_date.is_none() {
            self.event_date = other.event_date;
        }
        for d in other.drugs {
            self.push_drug(d);
        }
        for e in &other.adverse_events {
            self.push_event(e);
        }
    }

    /// Distinct normalized drug names, in first-mention order.
    pub fn unique_drugs(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::with_capacity(self.drugs.len());
        for d in &self.drugs {
            if !seen.contains(&d.normalized_name.as_str()) {
                seen.push(&d.normalized_name);
            }
        }
        seen
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoleFilter {
    /// All drug mentions.
    Full,
    /// Primary-suspect mentions only.
    PrimarySuspect,
}

impl RoleFilter {
    pub fn keeps(self, role: Role) -> bool {
        match self {
            RoleFilter::Full => true,
            RoleFilter::PrimarySuspect => role == Role::PrimarySuspect,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RoleFilter::Full => "FULL",
            RoleFilter::PrimarySuspect => "PS",
        }
    }
}

impl FromStr for RoleFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FULL" => Ok(RoleFilter::Full),
            "PS" => Ok(RoleFilter::PrimarySuspect),
            other => Err(format!("unknown role filter `{other}` (expected FULL or PS)")),
        }
    }
}

/// Drops mentions outside `role`, reports dated after `cutoff`, and reports
/// left without drugs or adverse events.
pub fn filter_reports<I>(
    reports: I,
    role: RoleFilter,
    cutoff: Option<ReportDate>,
) -> impl Iterator<Item = Report>
where
    I: IntoIterator<Item = Report>,
{
    reports.into_iter().filter_map(move |mut report| {
        if let (Some(cutoff), Some(date)) = (cutoff.as_ref(), report.event_date.as_ref()) {
            if date.is_after(cutoff) {
                return None;
            }
        }
        report.drugs.retain(|d| role.keeps(d.role));
        if report.drugs.is_empty() || report.adverse_events.is_empty() {
            None
        } else {
            Some(report)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    FaersAscii,
    CanonicalTsv,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Malformed lines are fatal instead of being counted and skipped.
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub lines: usize,
    pub rejects: usize,
    pub unknown_roles: usize,
}

impl fmt::Display for ParseStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lines={} rejects={} unknown_roles={}",
            self.lines, self.rejects, self.unknown_roles
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedReports {
    pub reports: Vec<Report>,
    pub stats: ParseStats,
}

impl ParseStats {
    fn reject(&mut self, opts: ParseOptions, err: Error) -> Result<()> {
        if opts.strict {
            return Err(err);
        }
        log::warn!("skipping malformed line: {err}");
        self.rejects += 1;
        Ok(())
    }

    fn role(&mut self, code: &str) -> Role {
        Role::from_code(code).unwrap_or_else(|| {
            self.unknown_roles += 1;
            Role::Concomitant
        })
    }
}

fn merge_into(map: &mut IndexMap<String, Report>, report: Report) {
    match map.get_mut(&report.report_id) {
        Some(existing) => existing.absorb(report),
        None => {
            map.insert(report.report_id.clone(), report);
        }
    }
}

/// Parses one canonical TSV line:
/// `report_id<TAB>YYYYQn<TAB>role:drug;role:drug<TAB>pt;pt`.
fn parse_canonical_line(line: &str, lineno: usize, stats: &mut ParseStats) -> Result<Report> {
    let err = |msg: String| Error::parse("canonical TSV", lineno, msg);
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
    }
    let id = fields[0].trim();
    if id.is_empty() {
        return Err(err("empty report id".into()));
    }
    let mut report = Report::new(id);
    if !fields[1].is_empty() {
        report.event_date = Some(fields[1].parse().map_err(err)?);
    }
    for item in fields[2].split(';').filter(|s| !s.is_empty()) {
        let (code, name) = item
            .split_once(':')
            .ok_or_else(|| err(format!("drug entry `{item}` lacks a role prefix")))?;
        let role = stats.role(code);
        report.push_drug(DrugMention::new(name, role));
    }
    for pt in fields[3].split(';') {
        report.push_event(pt);
    }
    Ok(report)
}

/// Streaming reader over canonical TSV; yields one report per line.
pub struct CanonicalReader<R> {
    source: R,
    lineno: usize,
    opts: ParseOptions,
    stats: ParseStats,
    buf: String,
}

impl<R: BufRead> CanonicalReader<R> {
    pub fn new(source: R, opts: ParseOptions) -> Self {
        CanonicalReader {
            source,
            lineno: 0,
            opts,
            stats: ParseStats::default(),
            buf: String::new(),
        }
    }

    pub fn stats(&self) -> ParseStats {
        self.stats
    }
}

impl<R: BufRead> Iterator for CanonicalReader<R> {
    type Item = Result<Report>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.source.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.lineno += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                continue;
            }
            self.stats.lines += 1;
            match parse_canonical_line(line, self.lineno, &mut self.stats) {
                Ok(report) => return Some(Ok(report)),
                Err(e) => {
                    if let Err(fatal) = self.stats.reject(self.opts, e) {
                        return Some(Err(fatal));
                    }
                }
            }
        }
    }
}

/// Reads a canonical TSV file, merging lines that share a report id.
pub fn parse_canonical<R: BufRead>(source: R, opts: ParseOptions) -> Result<ParsedReports> {
    let mut reader = CanonicalReader::new(source, opts);
    let mut map = IndexMap::new();
    for report in reader.by_ref() {
        merge_into(&mut map, report?);
    }
    Ok(ParsedReports {
        reports: map.into_values().collect(),
        stats: reader.stats(),
    })
}

/// Writes reports as canonical TSV using normalized drug names.
pub fn write_canonical<'a, W, I>(mut out: W, reports: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Report>,
{
    for report in reports {
        let bad = |what: &str| {
            Error::Config(format!(
                "report {} has a {what} that cannot be written as canonical TSV",
                report.report_id
            ))
        };
        if report.report_id.contains(['\t', '\n']) {
            return Err(bad("report id"));
        }
        let mut drugs = Vec::with_capacity(report.drugs.len());
        for d in &report.drugs {
            if d.normalized_name.contains([';', '\t', '\n']) {
                return Err(bad("drug name"));
            }
            drugs.push(format!("{}:{}", d.role.code(), d.normalized_name));
        }
        if report
            .adverse_events
            .iter()
            .any(|pt| pt.contains([';', '\t', '\n']))
        {
            return Err(bad("preferred term"));
        }
        let date = report.event_date.map(|d| d.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            report.report_id,
            date,
            drugs.join(";"),
            report.adverse_events.join(";")
        )?;
    }
    Ok(())
}

/// Column positions for one FAERS release layout. FAERS changed its file
/// layout between the legacy AERS era and the current one, so positions
/// are configured per era.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaersColumns {
    pub drug_report_id: usize,
    pub drug_seq: usize,
    pub drug_role: usize,
    pub drug_name: usize,
    pub reac_report_id: usize,
    pub reac_pt: usize,
    pub demo_report_id: usize,
    pub demo_event_date: usize,
    /// First line of each file is a header.
    pub header: bool,
    /// Date assigned to reports whose demographics row lacks one, typically
    /// the release quarter of the file set.
    pub default_date: Option<ReportDate>,
}

impl FaersColumns {
    /// FAERS layout used since 2012Q4 (`primaryid$caseid$drug_seq$role_cod$drugname...`).
    pub fn faers() -> Self {
        FaersColumns {
            drug_report_id: 0,
            drug_seq: 2,
            drug_role: 3,
            drug_name: 4,
            reac_report_id: 0,
            reac_pt: 2,
            demo_report_id: 0,
            demo_event_date: 4,
            header: true,
            default_date: None,
        }
    }

    /// Legacy AERS layout, 2004 to 2012Q3 (`ISR$DRUG_SEQ$ROLE_COD$DRUGNAME...`).
    pub fn legacy_aers() -> Self {
        FaersColumns {
            drug_report_id: 0,
            drug_seq: 1,
            drug_role: 2,
            drug_name: 3,
            reac_report_id: 0,
            reac_pt: 1,
            demo_report_id: 0,
            demo_event_date: 5,
            header: true,
            default_date: None,
        }
    }

    /// Parses a `key=value` mapping file. `layout=faers|aers` selects a
    /// preset; any other key overrides one position.
    pub fn parse<R: BufRead>(source: R) -> Result<Self> {
        let mut cols = FaersColumns::faers();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::parse("FAERS column mapping", idx + 1, m);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let pos = || {
                value
                    .parse::<usize>()
                    .map_err(|_| err(format!("`{key}` needs a column index, got `{value}`")))
            };
            match key {
                "layout" => {
                    let header = cols.header;
                    cols = match value {
                        "faers" => FaersColumns::faers(),
                        "aers" | "legacy" => FaersColumns::legacy_aers(),
                        other => return Err(err(format!("unknown layout `{other}`"))),
                    };
                    cols.header = header;
                }
                "drug.report_id" => cols.drug_report_id = pos()?,
                "drug.seq" => cols.drug_seq = pos()?,
                "drug.role" => cols.drug_role = pos()?,
                "drug.name" => cols.drug_name = pos()?,
                "reac.report_id" => cols.reac_report_id = pos()?,
                "reac.pt" => cols.reac_pt = pos()?,
                "demo.report_id" => cols.demo_report_id = pos()?,
                "demo.event_date" => cols.demo_event_date = pos()?,
                "header" => {
                    cols.header = match value {
                        "true" | "yes" | "1" => true,
                        "false" | "no" | "0" => false,
                        _ => return Err(err(format!("`header` must be true/false, got `{value}`"))),
                    }
                }
                "date" => cols.default_date = Some(value.parse().map_err(err)?),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        Ok(cols)
    }
}

/// The dollar-delimited file set of one FAERS quarter.
pub struct FaersSources<R> {
    pub drug: R,
    pub reac: R,
    pub demo: Option<R>,
}

fn dollar_fields(line: &str) -> Vec<&str> {
    line.split('$').map(str::trim).collect()
}

fn for_each_row<R: BufRead>(
    source: R,
    context: &str,
    header: bool,
    stats: &mut ParseStats,
    mut row: impl FnMut(&[&str], usize) -> std::result::Result<(), String>,
    opts: ParseOptions,
) -> Result<()> {
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if (header && idx == 0) || line.is_empty() {
            continue;
        }
        stats.lines += 1;
        let fields = dollar_fields(line);
        if let Err(msg) = row(&fields, idx + 1) {
            stats.reject(opts, Error::parse(context, idx + 1, msg))?;
        }
    }
    Ok(())
}

fn field<'a>(fields: &[&'a str], pos: usize, name: &str) -> std::result::Result<&'a str, String> {
    fields
        .get(pos)
        .copied()
        .ok_or_else(|| format!("missing column {pos} ({name}); row has {} fields", fields.len()))
}

/// Joins the drug, reaction and (optional) demographics files of a FAERS
/// quarter into reports, one per distinct report id.
pub fn parse_faers<R: BufRead>(
    sources: FaersSources<R>,
    cols: &FaersColumns,
    opts: ParseOptions,
) -> Result<ParsedReports> {
    let mut stats = ParseStats::default();
    let mut map: IndexMap<String, Report> = IndexMap::new();
    let mut unknown_roles = 0usize;

    // Drug rows are ordered by sequence number within a report.
    let mut drug_rows: Vec<(String, u64, DrugMention)> = Vec::new();
    for_each_row(
        sources.drug,
        "FAERS drug file",
        cols.header,
        &mut stats,
        |f, _| {
            let id = field(f, cols.drug_report_id, "report id")?;
            if id.is_empty() {
                return Err("empty report id".into());
            }
            let seq = field(f, cols.drug_seq, "drug sequence")?;
            let seq: u64 = seq.parse().map_err(|_| format!("bad drug sequence `{seq}`"))?;
            let code = field(f, cols.drug_role, "role code")?;
            let name = field(f, cols.drug_name, "drug name")?;
            let role = Role::from_code(code).unwrap_or_else(|| {
                unknown_roles += 1;
                Role::Concomitant
            });
            drug_rows.push((id.to_string(), seq, DrugMention::new(name, role)));
            Ok(())
        },
        opts,
    )?;
    let mut order: HashMap<String, usize> = HashMap::new();
    for (id, _, _) in &drug_rows {
        let next = order.len();
        order.entry(id.clone()).or_insert(next);
    }
    drug_rows.sort_by_key(|(id, seq, _)| (order[id], *seq));
    for (id, _, mention) in drug_rows {
        map.entry(id.clone())
            .or_insert_with(|| Report::new(id))
            .push_drug(mention);
    }

    for_each_row(
        sources.reac,
        "FAERS reaction file",
        cols.header,
        &mut stats,
        |f, _| {
            let id = field(f, cols.reac_report_id, "report id")?;
            if id.is_empty() {
                return Err("empty report id".into());
            }
            let pt = field(f, cols.reac_pt, "preferred term")?;
            map.entry(id.to_string())
                .or_insert_with(|| Report::new(id))
                .push_event(pt);
            Ok(())
        },
        opts,
    )?;

    if let Some(demo) = sources.demo {
        for_each_row(
            demo,
            "FAERS demographics file",
            cols.header,
            &mut stats,
            |f, _| {
                let id = field(f, cols.demo_report_id, "report id")?;
                let raw = f.get(cols.demo_event_date).copied().unwrap_or("");
                if let (Some(report), Some(date)) = (map.get_mut(id), ReportDate::from_faers(raw)) {
                    report.event_date = Some(date);
                }
                Ok(())
            },
            opts,
        )?;
    }
    if let Some(default) = cols.default_date {
        for report in map.values_mut() {
            report.event_date.get_or_insert(default);
        }
    }
    stats.unknown_roles += unknown_roles;
    Ok(ParsedReports {
        reports: map.into_values().collect(),
        stats,
    })
}
