//! Manifest-driven orchestration: ingest, vocabularies and counts, training
//! of every edition, lexicon, and the retrofitting sweep with baselines.
//!
//! Expensive stages are cached under `<output>/cache/<stage>-<key>/`, where
//! the key hashes the stage inputs and configuration. A stage directory is
//! only trusted once its `complete` marker exists.
//!
//! Manifest layout (paths relative to the manifest file):
//!
//! ```text
//! [input]
//! reports = reports.tsv          # or faers_drug / faers_reac / faers_demo
//! format = canonical             # canonical | faers
//! faers_columns = columns.txt    # optional, FAERS layout mapping
//! lexicon = lexicon.txt          # or rxnconso / rxnrel
//! reference.eu = eu.tsv          # one or more named reference sets
//! mapping.eu = eu_mapping.tsv    # optional outcome -> PT mapping
//!
//! [filter]
//! roles = FULL, PS
//! cutoff = 2019Q4
//! min_count = 1
//!
//! [train]
//! dim = 100
//! epochs = 10
//! negative_samples = 5
//! learning_rate = 0.025
//! min_learning_rate = 0.0001
//! noise_exponent = 0.75
//! subsample = off
//! threads = 1
//! seeds = 0:9
//! precision = f64
//!
//! [retrofit]
//! betas = 0:1:0.1
//! variants = plain, rescaled
//! iterations = 10
//! tolerance = 1e-6
//! normalize_first = true
//! weighting = inverse_degree
//!
//! [eval]
//! oov = exclude
//! aggregate = max
//! baselines = prr, ror
//! correction = none
//!
//! [output]
//! dir = out
//! cache = on
//! threads = 1
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::disproportionality::{Correction, Metric};
use crate::embedding::{EmbeddingSpace, VectorTable};
use crate::error::{Error, Result};
use crate::eval::{
    baseline_rows, beta_grid, load_mapping, load_reference, sweep, write_curve, write_editions, write_per_outcome,
    write_results, Aggregate, OovPolicy, ReferencePair, SweepConfig, SweepRow, Variant,
};
use crate::ingest::{
    filter_reports, parse_canonical, parse_faers, write_canonical, FaersColumns, FaersSources, ParseOptions,
    Report, ReportDate, RoleFilter,
};
use crate::lexicon::{build_graph, coverage_report, parse_rrf, LexiconGraph};
use crate::retrofit::{NeighborWeighting, RetrofitConfig};
use crate::scalar::Real;
use crate::train::{init_space, train, TrainConfig, TrainingCorpus};
use crate::vocab::{accumulate_counts, build_vocabularies, emit_events, GlobalCounts, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReportSource {
    Canonical(PathBuf),
    Faers {
        drug: PathBuf,
        reac: PathBuf,
        demo: Option<PathBuf>,
        columns: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LexiconSource {
    Lexicon(PathBuf),
    Rrf { conso: PathBuf, rel: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSource {
    pub name: String,
    pub path: PathBuf,
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CachePolicy {
    /// Reuse complete stage directories whose key matches.
    #[default]
    On,
    /// Recompute every stage and overwrite its directory.
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub reports: ReportSource,
    pub lexicon: LexiconSource,
    pub references: Vec<ReferenceSource>,
    pub roles: Vec<RoleFilter>,
    pub cutoff: Option<ReportDate>,
    pub min_count: u64,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub precision: Precision,
    pub betas: Vec<f64>,
    pub variants: Vec<Variant>,
    pub retrofit: RetrofitConfig<f64>,
    pub oov: OovPolicy,
    pub aggregate: Aggregate,
    pub baselines: Vec<Metric>,
    pub correction: Correction,
    pub output: PathBuf,
    pub cache: CachePolicy,
    /// Stage-level workers for independent editions and grid points.
    pub threads: usize,
    pub strict: bool,
}

type Sections = BTreeMap<String, BTreeMap<String, (String, usize)>>;

fn parse_sections(text: &str) -> Result<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_ascii_lowercase();
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse("manifest", idx + 1, format!("expected key = value, got `{line}`")));
        };
        let Some(section) = current.as_ref() else {
            return Err(Error::parse("manifest", idx + 1, "key outside of a [section]"));
        };
        let key = key.trim().to_string();
        let entries = sections.entry(section.clone()).or_default();
        if entries.insert(key.clone(), (value.trim().to_string(), idx + 1)).is_some() {
            return Err(Error::parse("manifest", idx + 1, format!("duplicate key `{key}` in [{section}]")));
        }
    }
    Ok(sections)
}

struct Section<'a> {
    name: &'a str,
    entries: BTreeMap<String, (String, usize)>,
}

impl Section<'_> {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => v
                .parse()
                .map_err(|e| Error::parse("manifest", line, format!("[{}] {key}: {e}", self.name))),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|e| Error::parse("manifest", line, format!("[{}] {key}: {e}", self.name))))
                .collect(),
        }
    }

    fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (_, line))) => Err(Error::parse("manifest", line, format!("unknown key `{key}` in [{}]", self.name))),
        }
    }
}

fn parse_flag(v: &str) -> std::result::Result<bool, String> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(format!("expected a boolean, got `{other}`")),
    }
}

/// `a:b` inclusive range or comma list.
pub fn parse_seeds(v: &str) -> std::result::Result<Vec<u64>, String> {
    if let Some((a, b)) = v.split_once(':') {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{v}`"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{v}`"))?;
        if b < a {
            return Err(format!("empty seed range `{v}`"));
        }
        return Ok((a..=b).collect());
    }
    v.split(',')
        .map(|s| s.trim().parse().map_err(|_| format!("bad seed `{s}`")))
        .collect()
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses manifest text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut sections = parse_sections(text)?;
        for name in sections.keys() {
            if !["input", "filter", "train", "retrofit", "eval", "output"].contains(&name.as_str()) {
                return Err(Error::Config(format!("unknown manifest section [{name}]")));
            }
        }
        let mut section = |name: &'static str| Section {
            name,
            entries: sections.remove(name).unwrap_or_default(),
        };
        let resolve = |p: String| -> PathBuf {
            let p = PathBuf::from(p);
            if p.is_absolute() { p } else { base.join(p) }
        };
        let missing = |what: &str| Error::Config(format!("manifest [input] needs {what}"));

        let mut input = section("input");
        let format = input.take("format").map(|v| v.0).unwrap_or_else(|| "canonical".into());
        let reports = match format.as_str() {
            "canonical" => ReportSource::Canonical(resolve(input.take("reports").ok_or_else(|| missing("reports"))?.0)),
            "faers" => ReportSource::Faers {
                drug: resolve(input.take("faers_drug").ok_or_else(|| missing("faers_drug"))?.0),
                reac: resolve(input.take("faers_reac").ok_or_else(|| missing("faers_reac"))?.0),
                demo: input.take("faers_demo").map(|v| resolve(v.0)),
                columns: input.take("faers_columns").map(|v| resolve(v.0)),
            },
            other => return Err(Error::Config(format!("unknown report format `{other}` (canonical or faers)"))),
        };
        let lexicon = match (input.take("lexicon"), input.take("rxnconso"), input.take("rxnrel")) {
            (Some(l), None, None) => LexiconSource::Lexicon(resolve(l.0)),
            (None, Some(c), Some(r)) => LexiconSource::Rrf {
                conso: resolve(c.0),
                rel: resolve(r.0),
            },
            _ => return Err(missing("either lexicon or both rxnconso and rxnrel")),
        };
        let ref_keys: Vec<String> = input.entries.keys().filter(|k| k.starts_with("reference.")).cloned().collect();
        let mut references = Vec::new();
        for key in ref_keys {
            let name = key["reference.".len()..].to_string();
            let path = resolve(input.take(&key).expect("listed key").0);
            let mapping = input.take(&format!("mapping.{name}")).map(|v| resolve(v.0));
            references.push(ReferenceSource { name, path, mapping });
        }
        input.finish()?;

        let mut filter = section("filter");
        let roles = filter.list("roles", vec![RoleFilter::Full])?;
        let cutoff = match filter.take("cutoff") {
            None => None,
            Some((v, _)) if v.eq_ignore_ascii_case("none") => None,
            Some((v, line)) => Some(v.parse().map_err(|e| Error::parse("manifest", line, format!("[filter] cutoff: {e}")))?),
        };
        let min_count = filter.parse("min_count", 1u64)?;
        filter.finish()?;

        let mut t = section("train");
        let defaults = TrainConfig::default();
        let subsample = match t.take("subsample") {
            None => None,
            Some((v, _)) if v.eq_ignore_ascii_case("off") || v.eq_ignore_ascii_case("none") => None,
            Some((v, line)) => Some(v.parse::<f64>().map_err(|e| Error::parse("manifest", line, format!("[train] subsample: {e}")))?),
        };
        let train = TrainConfig {
            dim: t.parse("dim", defaults.dim)?,
            epochs: t.parse("epochs", defaults.epochs)?,
            negative_samples: t.parse("negative_samples", defaults.negative_samples)?,
            initial_learning_rate: t.parse("learning_rate", defaults.initial_learning_rate)?,
            min_learning_rate: t.parse("min_learning_rate", defaults.min_learning_rate)?,
            noise_exponent: t.parse("noise_exponent", defaults.noise_exponent)?,
            subsample_threshold: subsample,
            seed: 0,
            threads: t.parse("threads", 1usize)?,
        };
        let seeds = match t.take("seeds") {
            None => (0..10).collect(),
            Some((v, line)) => parse_seeds(&v).map_err(|e| Error::parse("manifest", line, e))?,
        };
        let precision = match t.take("precision") {
            None => Precision::F64,
            Some((v, line)) => match v.as_str() {
                "f32" => Precision::F32,
                "f64" => Precision::F64,
                _ => return Err(Error::parse("manifest", line, "[train] precision must be f32 or f64")),
            },
        };
        t.finish()?;

        let mut r = section("retrofit");
        let betas = match r.take("betas") {
            None => beta_grid("0:1:0.1").expect("default grid"),
            Some((v, line)) => beta_grid(&v).map_err(|e| Error::parse("manifest", line, e))?,
        };
        let variants = r.list("variants", vec![Variant::Plain, Variant::Rescaled])?;
        let mut retrofit = RetrofitConfig::with_beta(0.0);
        retrofit.iterations = r.parse("iterations", retrofit.iterations)?;
        retrofit.tolerance = r.parse("tolerance", retrofit.tolerance)?;
        retrofit.normalize_first = match r.take("normalize_first") {
            None => true,
            Some((v, line)) => parse_flag(&v).map_err(|e| Error::parse("manifest", line, e))?,
        };
        retrofit.weighting = r.parse("weighting", NeighborWeighting::InverseDegree)?;
        r.finish()?;

        let mut e = section("eval");
        let oov = e.parse("oov", OovPolicy::Exclude)?;
        let aggregate = e.parse("aggregate", Aggregate::Max)?;
        let baselines = match e.take("baselines") {
            None => vec![Metric::Prr, Metric::Ror],
            Some((v, _)) if v.eq_ignore_ascii_case("none") => Vec::new(),
            Some((v, line)) => v
                .split(',')
                .map(|s| s.parse().map_err(|m| Error::parse("manifest", line, m)))
                .collect::<Result<_>>()?,
        };
        let correction = match e.take("correction") {
            None => Correction::None,
            Some((v, line)) => match v.to_ascii_lowercase().as_str() {
                "none" => Correction::None,
                "haldane" => Correction::Haldane,
                _ => return Err(Error::parse("manifest", line, "[eval] correction must be none or haldane")),
            },
        };
        e.finish()?;

        let mut o = section("output");
        let output = resolve(o.take("dir").map(|v| v.0).unwrap_or_else(|| "out".into()));
        let cache = match o.take("cache") {
            None => CachePolicy::On,
            Some((v, line)) => {
                if parse_flag(&v).map_err(|e| Error::parse("manifest", line, e))? {
                    CachePolicy::On
                } else {
                    CachePolicy::Off
                }
            }
        };
        let threads = o.parse("threads", 1usize)?;
        o.finish()?;

        Ok(Manifest {
            reports,
            lexicon,
            references,
            roles,
            cutoff,
            min_count,
            train,
            seeds,
            precision,
            betas,
            variants,
            retrofit,
            oov,
            aggregate,
            baselines,
            correction,
            output,
            cache,
            threads,
            strict: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut paths: Vec<&Path> = Vec::new();
        match &self.reports {
            ReportSource::Canonical(p) => paths.push(p),
            ReportSource::Faers { drug, reac, demo, columns } => {
                paths.extend([drug.as_path(), reac.as_path()]);
                paths.extend(demo.iter().chain(columns).map(PathBuf::as_path));
            }
        }
        match &self.lexicon {
            LexiconSource::Lexicon(p) => paths.push(p),
            LexiconSource::Rrf { conso, rel } => paths.extend([conso.as_path(), rel.as_path()]),
        }
        for r in &self.references {
            paths.push(&r.path);
            paths.extend(r.mapping.as_deref());
        }
        if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
            return Err(Error::Config(format!("input file {} does not exist", missing.display())));
        }
        if self.references.is_empty() {
            return Err(Error::Config("manifest names no reference set".into()));
        }
        if self.roles.is_empty() || self.seeds.is_empty() || self.betas.is_empty() || self.variants.is_empty() {
            return Err(Error::Config("roles, seeds, betas and variants must be non-empty".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.train.validate()?;
        for &b in &self.betas {
            let mut rc = self.retrofit;
            rc.alpha = 1.0 - b;
            rc.beta = b;
            rc.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub results: PathBuf,
    pub rows: Vec<SweepRow>,
    pub cache_hits: usize,
    pub cache_misses: usize,
}

fn digest_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::file(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn key_of(material: &str) -> String {
    hex::encode(&Sha256::digest(material.as_bytes())[..8])
}

struct Runner<'a> {
    manifest: &'a Manifest,
    cache_root: PathBuf,
    log: File,
    hits: usize,
    misses: usize,
}

impl Runner<'_> {
    fn log(&mut self, line: &str) -> Result<()> {
        log::info!("{line}");
        writeln!(self.log, "{line}")?;
        Ok(())
    }

    /// Runs `build` into a fresh stage directory unless a complete one with
    /// the same key exists. Returns the directory and whether it was a hit.
    fn stage(
        &mut self,
        stage: &str,
        key: &str,
        build: impl FnOnce(&Path) -> Result<String>,
    ) -> Result<PathBuf> {
        let dir = self.cache_root.join(format!("{stage}-{key}"));
        let marker = dir.join("complete");
        let started = Instant::now();
        if self.manifest.cache == CachePolicy::On && marker.is_file() {
            self.hits += 1;
            self.log(&format!("stage={stage} key={key} status=hit"))?;
            return Ok(dir);
        }
        let tmp = self.cache_root.join(format!(".{stage}-{key}.partial"));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| Error::file(&tmp, e))?;
        }
        fs::create_dir_all(&tmp).map_err(|e| Error::file(&tmp, e))?;
        let counters = build(&tmp).map_err(|e| match e {
            Error::Stage { .. } => e,
            other => Error::Stage {
                stage: stage.to_string(),
                file: tmp.display().to_string(),
                message: other.to_string(),
                counters: String::new(),
            },
        })?;
        File::create(tmp.join("complete")).map_err(|e| Error::file(&tmp, e))?;
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
        }
        fs::rename(&tmp, &dir).map_err(|e| Error::file(&dir, e))?;
        self.misses += 1;
        self.log(&format!(
            "stage={stage} key={key} status=built elapsed_ms={} {counters}",
            started.elapsed().as_millis()
        ))?;
        Ok(dir)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::file(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::file(path, e))?))
}

fn stage_error(stage: &str, file: &Path, err: Error, counters: String) -> Error {
    Error::Stage {
        stage: stage.to_string(),
        file: file.display().to_string(),
        message: err.to_string(),
        counters,
    }
}

struct Subset {
    name: String,
    key: String,
    dir: PathBuf,
}

/// Runs every stage and writes `results.tsv`, `editions.tsv`,
/// `per_outcome.tsv` and one curve file per (trainset, refset, variant).
pub fn run(manifest: &Manifest) -> Result<RunSummary> {
    match manifest.precision {
        Precision::F64 => run_typed::<f64>(manifest),
        Precision::F32 => run_typed::<f32>(manifest),
    }
}

/// Seed, trained space and per-epoch loss.
type Trained<T> = (u64, EmbeddingSpace<T>, Vec<f64>);

fn run_typed<T: Real>(m: &Manifest) -> Result<RunSummary> {
    m.validate()?;
    let out = &m.output;
    let cache_root = out.join("cache");
    let logs = out.join("logs");
    for dir in [&cache_root, &logs] {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    let log_path = logs.join("pipeline.log");
    let log = File::create(&log_path).map_err(|e| Error::file(&log_path, e))?;
    let mut runner = Runner {
        manifest: m,
        cache_root,
        log,
        hits: 0,
        misses: 0,
    };
    let opts = ParseOptions { strict: m.strict };

    // Ingest.
    let mut material = format!("ingest\nstrict={}\n", m.strict);
    match &m.reports {
        ReportSource::Canonical(p) => writeln!(material, "canonical {}", digest_file(p)?).ok(),
        ReportSource::Faers { drug, reac, demo, columns } => {
            writeln!(material, "faers {} {}", digest_file(drug)?, digest_file(reac)?).ok();
            for p in demo.iter().chain(columns) {
                writeln!(material, "{}", digest_file(p)?).ok();
            }
            writeln!(material, "demo={} columns={}", demo.is_some(), columns.is_some()).ok()
        }
    };
    let ingest_key = key_of(&material);
    let ingest_dir = runner.stage("ingest", &ingest_key, |dir| {
        let (parsed, file) = match &m.reports {
            ReportSource::Canonical(p) => (parse_canonical(open(p)?, opts), p.clone()),
            ReportSource::Faers { drug, reac, demo, columns } => {
                let cols = match columns {
                    Some(c) => FaersColumns::parse(open(c)?)?,
                    None => FaersColumns::faers(),
                };
                let demo = demo.as_deref().map(open).transpose()?;
                let sources = FaersSources {
                    drug: Box::new(open(drug)?) as Box<dyn std::io::BufRead>,
                    reac: Box::new(open(reac)?),
                    demo: demo.map(|d| Box::new(d) as Box<dyn std::io::BufRead>),
                };
                (parse_faers(sources, &cols, opts), drug.clone())
            }
        };
        let parsed = parsed.map_err(|e| stage_error("ingest", &file, e, String::new()))?;
        let path = dir.join("reports.tsv");
        let mut w = create(&path)?;
        write_canonical(&mut w, &parsed.reports)?;
        w.flush()?;
        Ok(format!("reports={} {}", parsed.reports.len(), parsed.stats))
    })?;
    let reports_path = ingest_dir.join("reports.tsv");
    let mut all_reports: Option<Vec<Report>> = None;
    let load_reports = |all: &mut Option<Vec<Report>>| -> Result<Vec<Report>> {
        if all.is_none() {
            let parsed = parse_canonical(open(&reports_path)?, ParseOptions { strict: true })
                .map_err(|e| stage_error("ingest", &reports_path, e, String::new()))?;
            *all = Some(parsed.reports);
        }
        Ok(all.clone().unwrap_or_default())
    };

    // Vocabularies and counts per training subset.
    let mut subsets = Vec::new();
    for &role in &m.roles {
        let cutoff = m.cutoff.map(|c| c.to_string()).unwrap_or_else(|| "none".into());
        let key = key_of(&format!("vocab\n{ingest_key}\nrole={}\ncutoff={cutoff}\nmin_count={}\n", role.name(), m.min_count));
        let mut cached_reports = None;
        let dir = runner.stage("vocab", &key, |dir| {
            let reports: Vec<Report> = filter_reports(load_reports(&mut all_reports)?, role, m.cutoff).collect();
            let (drugs, ades) = build_vocabularies(&reports, m.min_count)?;
            let counts = accumulate_counts(&reports, &drugs, &ades);
            drugs.write_tsv(create(&dir.join("drugs.tsv"))?)?;
            ades.write_tsv(create(&dir.join("ades.tsv"))?)?;
            counts.write_tsv(create(&dir.join("counts.tsv"))?, &drugs, &ades)?;
            let n = reports.len();
            cached_reports = Some(reports);
            Ok(format!("reports={n} drugs={} ades={} counted={}", drugs.len(), ades.len(), counts.total_reports))
        })?;
        subsets.push((
            Subset {
                name: role.name().to_string(),
                key,
                dir,
            },
            role,
            cached_reports,
        ));
    }

    // Lexicon.
    let lex_material = match &m.lexicon {
        LexiconSource::Lexicon(p) => format!("lexicon\nfile {}\n", digest_file(p)?),
        LexiconSource::Rrf { conso, rel } => format!("lexicon\nrrf {} {}\nstrict={}\n", digest_file(conso)?, digest_file(rel)?, m.strict),
    };
    let lex_dir = runner.stage("lexicon", &key_of(&lex_material), |dir| {
        let (graph, counters) = match &m.lexicon {
            LexiconSource::Lexicon(p) => {
                let g = LexiconGraph::read_lexicon(open(p)?).map_err(|e| stage_error("lexicon", p, e, String::new()))?;
                (g, String::new())
            }
            LexiconSource::Rrf { conso, rel } => {
                let parsed = parse_rrf(open(conso)?, open(rel)?, opts).map_err(|e| stage_error("lexicon", conso, e, String::new()))?;
                let counters = format!("records={} edges={} {}", parsed.records.len(), parsed.edges.len(), parsed.stats);
                (build_graph(&parsed.records, &parsed.edges), counters)
            }
        };
        let mut w = create(&dir.join("lexicon.txt"))?;
        graph.write_lexicon(&mut w)?;
        w.flush()?;
        Ok(format!("terms={} edges={} {counters}", graph.len(), graph.edge_count()))
    })?;
    let graph = LexiconGraph::read_lexicon(open(&lex_dir.join("lexicon.txt"))?)?;

    // Reference sets.
    let mut refsets: Vec<(String, Vec<ReferencePair>)> = Vec::new();
    for r in &m.references {
        let mapping = r.mapping.as_deref().map(|p| load_mapping(open(p)?)).transpose()?;
        let pairs = load_reference(open(&r.path)?, mapping.as_ref()).map_err(|e| stage_error("eval", &r.path, e, String::new()))?;
        refsets.push((r.name.clone(), pairs));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(m.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut rows = Vec::new();
    for (subset, role, mut cached_reports) in subsets {
        let drugs = Vocabulary::read_tsv(open(&subset.dir.join("drugs.tsv"))?)?;
        let ades = Vocabulary::read_tsv(open(&subset.dir.join("ades.tsv"))?)?;
        let counts = GlobalCounts::read_tsv(open(&subset.dir.join("counts.tsv"))?, &drugs, &ades)?;
        let coverage = coverage_report(&graph, drugs.terms().iter().map(String::as_str));
        runner.log(&format!("subset={} coverage {coverage}", subset.name))?;

        // Training: one cached stage per seed; misses are trained together.
        let tc = &m.train;
        let train_material = format!(
            "train\n{}\nprecision={}\ndim={} epochs={} neg={} lr={} min_lr={} noise={} subsample={:?} threads={}\n",
            subset.key,
            std::any::type_name::<T>(),
            tc.dim,
            tc.epochs,
            tc.negative_samples,
            tc.initial_learning_rate,
            tc.min_learning_rate,
            tc.noise_exponent,
            tc.subsample_threshold,
            tc.threads
        );
        let seed_keys: Vec<(u64, String)> = m.seeds.iter().map(|&s| (s, key_of(&format!("{train_material}seed={s}\n")))).collect();
        let pending: Vec<&(u64, String)> = seed_keys
            .iter()
            .filter(|(_, k)| m.cache == CachePolicy::Off || !runner.cache_root.join(format!("train-{k}/complete")).is_file())
            .collect();
        let mut trained: BTreeMap<u64, (EmbeddingSpace<T>, Vec<f64>)> = BTreeMap::new();
        if !pending.is_empty() {
            let reports = match cached_reports.take() {
                Some(r) => r,
                None => filter_reports(load_reports(&mut all_reports)?, role, m.cutoff).collect(),
            };
            let corpus = TrainingCorpus::new(emit_events(&reports, &drugs, &ades), &ades, &drugs);
            drop(reports);
            let results: Vec<Result<Trained<T>>> = pool.install(|| {
                pending
                    .par_iter()
                    .map(|(seed, _)| {
                        let cfg = TrainConfig { seed: *seed, ..tc.clone() };
                        let mut space = init_space::<T>(&ades, &drugs, &cfg)?;
                        let report = train(&mut space, &corpus, &cfg)?;
                        Ok((*seed, space, report.epoch_loss))
                    })
                    .collect()
            });
            for r in results {
                let (seed, space, loss) = r.map_err(|e| stage_error("train", &subset.dir, e, format!("events={}", corpus.events.len())))?;
                trained.insert(seed, (space, loss));
            }
        }
        let mut editions = Vec::with_capacity(seed_keys.len());
        for (seed, key) in &seed_keys {
            let fresh = trained.remove(seed);
            let dir = runner.stage("train", key, |dir| {
                let (space, loss) = fresh.ok_or_else(|| Error::Config(format!("edition {seed} was not trained")))?;
                space.ades.write_text(create(&dir.join("ades.vec"))?)?;
                space.drugs.write_text(create(&dir.join("drugs.vec"))?)?;
                let mut w = create(&dir.join("loss.tsv"))?;
                for (epoch, l) in loss.iter().enumerate() {
                    writeln!(w, "{epoch}\t{l}")?;
                }
                w.flush()?;
                Ok(format!("seed={seed} final_loss={}", loss.last().copied().unwrap_or(f64::NAN)))
            })?;
            let ades_t = VectorTable::<T>::read_text(open(&dir.join("ades.vec"))?)?;
            let drugs_t = VectorTable::<T>::read_text(open(&dir.join("drugs.vec"))?)?;
            editions.push(EmbeddingSpace::new(ades_t, drugs_t, *seed)?);
        }

        let base = RetrofitConfig {
            alpha: T::one(),
            beta: T::zero(),
            iterations: m.retrofit.iterations,
            tolerance: T::of(m.retrofit.tolerance),
            normalize_first: m.retrofit.normalize_first,
            rescale_after: false,
            weighting: m.retrofit.weighting,
        };
        let sweep_cfg = SweepConfig {
            betas: m.betas.iter().map(|&b| T::of(b)).collect(),
            variants: m.variants.clone(),
            retrofit: base,
            policy: m.oov,
            aggregate: m.aggregate,
            threads: m.threads,
        };
        let started = Instant::now();
        let mut subset_rows = sweep(&subset.name, &editions, &graph, &refsets, &sweep_cfg)
            .map_err(|e| stage_error("sweep", &subset.dir, e, String::new()))?;
        runner.log(&format!(
            "stage=sweep subset={} rows={} elapsed_ms={}",
            subset.name,
            subset_rows.len(),
            started.elapsed().as_millis()
        ))?;
        if !m.baselines.is_empty() {
            rows.extend(
                baseline_rows(&subset.name, &counts, &drugs, &ades, &refsets, &m.baselines, m.correction, m.oov, m.aggregate)
                    .map_err(|e| stage_error("eval", &subset.dir, e, String::new()))?,
            );
        }
        rows.append(&mut subset_rows);
    }

    let results = out.join("results.tsv");
    let mut w = create(&results)?;
    write_results(&mut w, &rows)?;
    w.flush()?;
    let mut w = create(&out.join("editions.tsv"))?;
    write_editions(&mut w, &rows)?;
    w.flush()?;
    let mut w = create(&out.join("per_outcome.tsv"))?;
    write_per_outcome(&mut w, &rows)?;
    w.flush()?;
    let curves = out.join("curves");
    fs::create_dir_all(&curves).map_err(|e| Error::file(&curves, e))?;
    for role in &m.roles {
        for (refname, _) in &refsets {
            for &variant in &m.variants {
                let path = curves.join(format!("{}_{refname}_{variant}.tsv", role.name()));
                let mut w = create(&path)?;
                write_curve(&mut w, &rows, role.name(), refname, variant)?;
                w.flush()?;
            }
        }
    }
    let (hits, misses) = (runner.hits, runner.misses);
    runner.log(&format!("done results={} rows={} cache_hits={hits} cache_misses={misses}", results.display(), rows.len()))?;
    Ok(RunSummary {
        results,
        rows,
        cache_hits: hits,
        cache_misses: misses,
    })
}
