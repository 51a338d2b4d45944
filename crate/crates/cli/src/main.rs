//! `pvsignal` command-line front end.
//!
//! Exit status:
//!
//! | code | meaning                                        |
//! |------|------------------------------------------------|
//! | 0    | success                                        |
//! | 1    | unclassified failure                           |
//! | 2    | usage error (bad flags or arguments)           |
//! | 3    | malformed input file                           |
//! | 4    | invalid configuration or manifest              |
//! | 5    | pipeline stage failure                         |
//! | 6    | I/O error                                      |
//! | 7    | metric undefined (e.g. AUC with one class)     |
//! | 8    | unknown term or numerical failure in training  |

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use pvsignal::disproportionality::{Correction, Metric};
use pvsignal::embedding::{EmbeddingSpace, VectorTable};
use pvsignal::eval::{
    auc, auc_of_score_file, beta_grid, load_mapping, load_reference, score_reference, sweep, write_editions,
    write_reference, write_results, Aggregate, CountScorer, EmbeddingScorer, Label, OovPolicy, PairScorer,
    ReferencePair, SweepConfig, Variant,
};
use pvsignal::ingest::{
    filter_reports, parse_canonical, parse_faers, write_canonical, FaersColumns, FaersSources, ParseOptions,
    Report, ReportDate, RoleFilter,
};
use pvsignal::lexicon::{build_graph, coverage_report, parse_rrf, LexiconGraph};
use pvsignal::pipeline::{self, Manifest};
use pvsignal::retrofit::{retrofit, NeighborWeighting, RetrofitConfig};
use pvsignal::synth::{generate, SynthSpec};
use pvsignal::train::{init_space, train, TrainConfig, TrainingCorpus};
use pvsignal::vocab::{accumulate_counts, build_vocabularies, emit_events, GlobalCounts, Vocabulary};
use pvsignal::Error;

#[derive(Parser)]
#[command(name = "pvsignal", version, about = "Drug safety signal detection from spontaneous reports")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Common {
    /// Random seed (training, synthetic data).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Treat malformed input lines as fatal.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads; 1 keeps every command deterministic.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Parse reports, filter by role and date, write canonical TSV.
    Ingest(IngestArgs),
    /// Build vocabularies and counts and train one edition.
    Train(TrainArgs),
    /// Build a drug lexicon from RxNorm RRF files.
    Lexicon(LexiconArgs),
    /// Retrofit a drug vector table to a lexicon.
    Retrofit(RetrofitArgs),
    /// Score reference pairs with an embedding or a disproportionality metric.
    Score(ScoreArgs),
    /// AUC of a scored-pair file.
    Eval(EvalArgs),
    /// Beta sweep over trained editions.
    Sweep(SweepArgs),
    /// Generate a synthetic corpus with planted signals.
    Synth(SynthArgs),
    /// Run the full pipeline from a manifest.
    Run(RunArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Canonical TSV input (ignored with --faers-drug).
    #[arg(long)]
    reports: Option<PathBuf>,
    #[arg(long)]
    faers_drug: Option<PathBuf>,
    #[arg(long)]
    faers_reac: Option<PathBuf>,
    #[arg(long)]
    faers_demo: Option<PathBuf>,
    /// FAERS column mapping file.
    #[arg(long)]
    faers_columns: Option<PathBuf>,
    #[arg(long, default_value = "FULL")]
    role: RoleFilter,
    /// Drop reports dated after this quarter, e.g. 2019Q4.
    #[arg(long)]
    cutoff: Option<ReportDate>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Canonical TSV reports.
    #[arg(long)]
    reports: PathBuf,
    #[arg(long, default_value = "FULL")]
    role: RoleFilter,
    #[arg(long)]
    cutoff: Option<ReportDate>,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 0.025)]
    learning_rate: f64,
    /// Subsampling threshold; off when absent.
    #[arg(long)]
    subsample: Option<f64>,
    /// Output directory for vectors, vocabularies and counts.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LexiconArgs {
    #[arg(long)]
    rxnconso: PathBuf,
    #[arg(long)]
    rxnrel: PathBuf,
    /// Drug vocabulary TSV for a coverage report.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RetrofitArgs {
    /// Drug vector table.
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Scale rows to unit norm first.
    #[arg(long)]
    normalize: bool,
    /// Restore original row norms afterwards.
    #[arg(long)]
    rescale: bool,
    #[arg(long, default_value = "inverse_degree")]
    weighting: NeighborWeighting,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReferenceArgs {
    /// Reference TSV: drug, outcome, label, group.
    #[arg(long)]
    reference: PathBuf,
    /// Outcome to PT mapping TSV.
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[arg(long, default_value = "exclude")]
    oov: OovPolicy,
    #[arg(long, default_value = "max")]
    aggregate: Aggregate,
}

#[derive(Args)]
struct ScoreArgs {
    /// aer2vec, prr or ror.
    #[arg(long, default_value = "aer2vec")]
    method: String,
    /// Directory written by `train` (vectors, vocabularies, counts).
    #[arg(long)]
    model: PathBuf,
    /// Drug vectors replacing the model's, e.g. a retrofitted table.
    #[arg(long)]
    drug_vectors: Option<PathBuf>,
    #[arg(long)]
    haldane: bool,
    #[command(flatten)]
    reference: ReferenceArgs,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Scored pairs: drug, ade, label, score or UNDEF.
    #[arg(long)]
    scores: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Directories written by `train`, one per edition.
    #[arg(long, num_args = 1.., required = true)]
    editions: Vec<PathBuf>,
    #[arg(long)]
    lexicon: PathBuf,
    /// Reference sets as name=path or name=path,mapping.
    #[arg(long = "refset", num_args = 1.., required = true)]
    refsets: Vec<String>,
    /// start:stop:step, a comma list or a single value.
    #[arg(long, default_value = "0:1:0.1")]
    betas: String,
    #[arg(long, value_delimiter = ',', default_value = "plain,rescaled")]
    variants: Vec<Variant>,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Skip unit-norm scaling before retrofitting.
    #[arg(long)]
    no_normalize: bool,
    #[arg(long, default_value = "exclude")]
    oov: OovPolicy,
    #[arg(long, default_value = "max")]
    aggregate: Aggregate,
    #[arg(long, default_value = "trainset")]
    trainset: String,
    /// Results TSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-edition AUC TSV.
    #[arg(long)]
    editions_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100_000)]
    reports: usize,
    #[arg(long, default_value_t = 200)]
    drugs: usize,
    #[arg(long, default_value_t = 50)]
    ades: usize,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    /// Active members per class, held-out ones included.
    #[arg(long, default_value_t = 6)]
    members: usize,
    #[arg(long, default_value_t = 1)]
    held_out: usize,
    #[arg(long, default_value_t = 2)]
    decoys: usize,
    #[arg(long, default_value_t = 3.0)]
    lift: f64,
    #[arg(long, default_value_t = 0.3)]
    synonym_rate: f64,
    /// Output directory: reports.tsv, lexicon.txt, truth.tsv, manifest.ini.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Parse { .. } => 3,
                Error::Config(_) => 4,
                Error::Stage { .. } => 5,
                Error::Io(_) | Error::File { .. } => 6,
                Error::Undefined(_) => 7,
                Error::NotFound(_) | Error::NonFinite { .. } => 8,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 6;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?))
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let common = cli.common;
    if common.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()).into());
    }
    let opts = ParseOptions { strict: common.strict };
    match cli.command {
        Command::Ingest(a) => ingest(a, opts),
        Command::Train(a) => train_cmd(a, common, opts),
        Command::Lexicon(a) => lexicon_cmd(a, opts),
        Command::Retrofit(a) => retrofit_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::Eval(a) => {
            let value = auc_of_score_file(open(&a.scores)?)?;
            println!("auc\t{value}");
            Ok(())
        }
        Command::Sweep(a) => sweep_cmd(a, common),
        Command::Synth(a) => synth_cmd(a, common),
        Command::Run(a) => {
            let mut manifest = Manifest::load(&a.manifest)?;
            manifest.strict |= common.strict;
            if common.threads > 1 {
                manifest.threads = common.threads;
            }
            let summary = pipeline::run(&manifest)?;
            println!(
                "results\t{}\nrows\t{}\ncache_hits\t{}\ncache_misses\t{}",
                summary.results.display(),
                summary.rows.len(),
                summary.cache_hits,
                summary.cache_misses
            );
            Ok(())
        }
    }
}

fn ingest(a: IngestArgs, opts: ParseOptions) -> anyhow::Result<()> {
    let parsed = match (&a.faers_drug, &a.faers_reac, &a.reports) {
        (Some(drug), Some(reac), _) => {
            let cols = match &a.faers_columns {
                Some(p) => FaersColumns::parse(open(p)?)?,
                None => FaersColumns::faers(),
            };
            let sources = FaersSources {
                drug: open(drug)?,
                reac: open(reac)?,
                demo: a.faers_demo.as_deref().map(open).transpose()?,
            };
            parse_faers(sources, &cols, opts)?
        }
        (None, None, Some(path)) => parse_canonical(open(path)?, opts)?,
        _ => return Err(Error::Config("give --reports, or both --faers-drug and --faers-reac".into()).into()),
    };
    let stats = parsed.stats;
    let reports: Vec<Report> = filter_reports(parsed.reports, a.role, a.cutoff).collect();
    let mut out = create(&a.out)?;
    write_canonical(&mut out, &reports)?;
    out.flush()?;
    eprintln!("reports={} {stats}", reports.len());
    Ok(())
}

fn load_reports(path: &Path, role: RoleFilter, cutoff: Option<ReportDate>, opts: ParseOptions) -> anyhow::Result<Vec<Report>> {
    let parsed = parse_canonical(open(path)?, opts)?;
    Ok(filter_reports(parsed.reports, role, cutoff).collect())
}

fn train_cmd(a: TrainArgs, common: Common, opts: ParseOptions) -> anyhow::Result<()> {
    let reports = load_reports(&a.reports, a.role, a.cutoff, opts)?;
    let (drugs, ades) = build_vocabularies(&reports, a.min_count)?;
    let counts = accumulate_counts(&reports, &drugs, &ades);
    let corpus = TrainingCorpus::new(emit_events(&reports, &drugs, &ades), &ades, &drugs);
    let cfg = TrainConfig {
        dim: a.dim,
        epochs: a.epochs,
        negative_samples: a.negatives,
        initial_learning_rate: a.learning_rate,
        subsample_threshold: a.subsample,
        seed: common.seed,
        threads: common.threads,
        ..TrainConfig::default()
    };
    let mut space = init_space::<f64>(&ades, &drugs, &cfg)?;
    let report = train(&mut space, &corpus, &cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    space.ades.write_text(create(&a.out.join("ades.vec"))?)?;
    space.drugs.write_text(create(&a.out.join("drugs.vec"))?)?;
    drugs.write_tsv(create(&a.out.join("drugs.tsv"))?)?;
    ades.write_tsv(create(&a.out.join("ades.tsv"))?)?;
    counts.write_tsv(create(&a.out.join("counts.tsv"))?, &drugs, &ades)?;
    fs::write(a.out.join("seed"), format!("{}\n", common.seed))?;
    eprintln!(
        "reports={} drugs={} ades={} events={} final_loss={}",
        reports.len(),
        drugs.len(),
        ades.len(),
        corpus.events.len(),
        report.epoch_loss.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn lexicon_cmd(a: LexiconArgs, opts: ParseOptions) -> anyhow::Result<()> {
    let parsed = parse_rrf(open(&a.rxnconso)?, open(&a.rxnrel)?, opts)?;
    let graph = build_graph(&parsed.records, &parsed.edges);
    let mut out = create(&a.out)?;
    graph.write_lexicon(&mut out)?;
    out.flush()?;
    eprintln!("terms={} edges={} {}", graph.len(), graph.edge_count(), parsed.stats);
    if let Some(v) = &a.vocab {
        let vocab = Vocabulary::read_tsv(open(v)?)?;
        println!("{}", coverage_report(&graph, vocab.terms().iter().map(String::as_str)));
    }
    Ok(())
}

fn retrofit_cmd(a: RetrofitArgs) -> anyhow::Result<()> {
    let table = VectorTable::<f64>::read_text(open(&a.vectors)?)?;
    let graph = LexiconGraph::read_lexicon(open(&a.lexicon)?)?;
    let cfg = RetrofitConfig {
        alpha: 1.0 - a.beta,
        beta: a.beta,
        iterations: a.iterations,
        tolerance: a.tolerance,
        normalize_first: a.normalize,
        rescale_after: a.rescale,
        weighting: a.weighting,
    };
    let result = retrofit(&table, &graph, &cfg)?;
    result.drug_vectors.write_text(create(&a.out)?)?;
    eprintln!(
        "updated={} unchanged={} ignored_graph_terms={} sweeps={} degenerate_rows={}",
        result.updated_terms,
        result.unchanged_terms,
        result.ignored_graph_terms,
        result.sweeps(),
        result.degenerate_rows
    );
    Ok(())
}

fn load_refset(r: &ReferenceArgs) -> anyhow::Result<Vec<ReferencePair>> {
    let mapping = match r.mapping.as_deref() {
        Some(p) => Some(load_mapping(open(p)?)?),
        None => None,
    };
    Ok(load_reference(open(&r.reference)?, mapping.as_ref())?)
}

fn score_cmd(a: ScoreArgs) -> anyhow::Result<()> {
    let pairs = load_refset(&a.reference)?;
    let model = &a.model;
    let scored = match a.method.as_str() {
        "aer2vec" | "retrofit" => {
            let ades = VectorTable::<f64>::read_text(open(&model.join("ades.vec"))?)?;
            let drugs_path = a.drug_vectors.clone().unwrap_or_else(|| model.join("drugs.vec"));
            let drugs = VectorTable::<f64>::read_text(open(&drugs_path)?)?;
            let scorer = EmbeddingScorer {
                ades: &ades,
                drugs: &drugs,
                method: a.method.clone(),
            };
            score_reference(&pairs, &scorer, a.reference.oov, a.reference.aggregate, None)
        }
        other => {
            let metric: Metric = other.parse().map_err(|e: String| anyhow!(Error::Config(e)))?;
            let drugs = Vocabulary::read_tsv(open(&model.join("drugs.tsv"))?)?;
            let ades = Vocabulary::read_tsv(open(&model.join("ades.tsv"))?)?;
            let counts = GlobalCounts::read_tsv(open(&model.join("counts.tsv"))?, &drugs, &ades)?;
            let scorer = CountScorer {
                counts: &counts,
                drugs: &drugs,
                ades: &ades,
                metric,
                correction: if a.haldane { Correction::Haldane } else { Correction::None },
            };
            score_reference(&pairs, &scorer as &dyn PairScorer, a.reference.oov, a.reference.aggregate, None)
        }
    };
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "drug\tade\tlabel\tscore")?;
    for p in &scored.pairs {
        let label = match p.pair.label {
            Label::Positive => "positive",
            Label::Negative => "negative",
        };
        let score = p.score.map_or_else(|| "UNDEF".to_string(), |s| s.to_string());
        writeln!(out, "{}\t{}\t{label}\t{score}", p.pair.drug, p.pair.outcome)?;
    }
    out.flush()?;
    match auc(&scored.pairs) {
        Ok(v) => eprintln!("auc={v} scored={} missing={}", scored.n_scored(), scored.n_missing),
        Err(e) => eprintln!("auc undefined ({e}) scored={} missing={}", scored.n_scored(), scored.n_missing),
    }
    Ok(())
}

fn read_edition(dir: &Path, fallback_seed: u64) -> anyhow::Result<EmbeddingSpace<f64>> {
    let ades = VectorTable::read_text(open(&dir.join("ades.vec"))?)?;
    let drugs = VectorTable::read_text(open(&dir.join("drugs.vec"))?)?;
    let seed = fs::read_to_string(dir.join("seed"))
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(fallback_seed);
    Ok(EmbeddingSpace::new(ades, drugs, seed)?)
}

fn sweep_cmd(a: SweepArgs, common: Common) -> anyhow::Result<()> {
    let editions = a
        .editions
        .iter()
        .enumerate()
        .map(|(i, d)| read_edition(d, i as u64))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let graph = LexiconGraph::read_lexicon(open(&a.lexicon)?)?;
    let mut refsets = Vec::new();
    for spec in &a.refsets {
        let (name, paths) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--refset `{spec}` is not name=path[,mapping]")))?;
        let (path, mapping) = match paths.split_once(',') {
            Some((p, m)) => (PathBuf::from(p), Some(PathBuf::from(m))),
            None => (PathBuf::from(paths), None),
        };
        let r = ReferenceArgs {
            reference: path,
            mapping,
            oov: a.oov,
            aggregate: a.aggregate,
        };
        refsets.push((name.to_string(), load_refset(&r)?));
    }
    let betas = beta_grid(&a.betas).map_err(Error::Config)?;
    let mut base = RetrofitConfig::with_beta(0.0);
    base.iterations = a.iterations;
    base.normalize_first = !a.no_normalize;
    let cfg = SweepConfig {
        betas,
        variants: a.variants.clone(),
        retrofit: base,
        policy: a.oov,
        aggregate: a.aggregate,
        threads: common.threads,
    };
    let rows = sweep(&a.trainset, &editions, &graph, &refsets, &cfg)?;
    let mut out = output(a.out.as_deref())?;
    write_results(&mut out, &rows)?;
    out.flush()?;
    if let Some(p) = &a.editions_out {
        let mut w = create(p)?;
        write_editions(&mut w, &rows)?;
        w.flush()?;
    }
    Ok(())
}

fn synth_cmd(a: SynthArgs, common: Common) -> anyhow::Result<()> {
    let spec = SynthSpec::planted(
        a.reports,
        a.drugs,
        a.ades,
        a.classes,
        a.members,
        a.held_out,
        a.decoys,
        a.lift,
        a.synonym_rate,
        common.seed,
    );
    let corpus = generate(&spec)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = create(&a.out.join("reports.tsv"))?;
    write_canonical(&mut w, &corpus.reports)?;
    w.flush()?;
    let mut w = create(&a.out.join("lexicon.txt"))?;
    corpus.lexicon.write_lexicon(&mut w)?;
    w.flush()?;
    let mut w = create(&a.out.join("truth.tsv"))?;
    write_reference(&mut w, &corpus.truth)?;
    w.flush()?;
    fs::write(
        a.out.join("manifest.ini"),
        "[input]\nreports = reports.tsv\nlexicon = lexicon.txt\nreference.synth = truth.tsv\n\n[train]\nseeds = 0:9\n\n[retrofit]\nbetas = 0:1:0.1\n\n[output]\ndir = out\n",
    )?;
    eprintln!(
        "reports={} truth_pairs={} lexicon_terms={}",
        corpus.reports.len(),
        corpus.truth.len(),
        corpus.lexicon.len()
    );
    Ok(())
}
