//! Command-line front end. Every stage reads and writes files, so each stage
//! can be re-run from its materialized inputs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or I/O error. Each run writes
//! `<output>.manifest.json` next to its primary output.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::align::{
    align_corpus, compute_stats, AlignError, AlignOptions, AlignedSample, BuildCounters,
    CandidateCounts, CorpusRecord, EntityMention, Paragraph, SampleRecord, SsmRecord,
};
use crate::kb::{load_kb, KbBuilder, KnowledgeBase, Triplet};
use crate::masking::{MaskScheme, MaskedRecord, Vocabulary};
use crate::model::{load_checkpoint, save_checkpoint, train, ModelConfig, TrainOptions};
use crate::pipeline::{mask_dataset, mask_salient, training_examples, vocabulary_for, MaskPlan, Objective};
use crate::probe::{
    evaluate, filter_leakage, instantiate_all, load_facts, load_templates, predict_all,
    split_questions, FactRecord, MetricsReport,
};
use crate::synth::{n1_world, random_fixture, FixtureOptions, WorldOptions};

pub const LOG_ENV: &str = "DETMASK_LOG";

#[derive(Debug, Parser)]
#[command(name = "detmask", version, about = "Deterministic masking pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and normalize a knowledge base from three TSV files.
    BuildKb(BuildKbArgs),
    /// Align a JSONL corpus with a knowledge base.
    Align(AlignArgs),
    /// Tokenize and mask aligned samples.
    Mask(MaskArgs),
    /// Train the toy model on masked records.
    Train(TrainArgs),
    /// Probe a trained model with cloze templates.
    Probe(ProbeArgs),
    /// Tabulate one or more probe reports.
    Report(ReportArgs),
    /// Summarize an aligned dataset.
    Stats(StatsArgs),
    /// Write a synthetic KB, corpus, templates and facts.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct BuildKbArgs {
    #[arg(long)]
    pub triplets: PathBuf,
    #[arg(long)]
    pub entities: PathBuf,
    #[arg(long)]
    pub predicates: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Knowledge-base directory.
    #[arg(long)]
    pub kb: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Deterministic samples (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Paragraphs with linked entities, for salient span masking.
    #[arg(long)]
    pub ssm: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long, required_unless_present = "ssm")]
    pub samples: Option<PathBuf>,
    /// Salient-span input; required for `salient_span`.
    #[arg(long)]
    pub ssm: Option<PathBuf>,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: MaskScheme,
    #[arg(long, default_value = "mlm", value_parser = parse_objective)]
    pub objective: Objective,
    #[arg(long)]
    pub out: PathBuf,
    /// Existing vocabulary; built from the input texts when absent.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub vocab_out: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub max_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub masked: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log (JSONL).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 32)]
    pub d: usize,
    /// Defaults to 4d.
    #[arg(long)]
    pub d_ff: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub max_len: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_con: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_cls: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Checkpoint path.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub templates: PathBuf,
    #[arg(long)]
    pub facts: PathBuf,
    /// Report path (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Knowledge base for relation types; the facts themselves otherwise.
    #[arg(long)]
    pub kb: Option<PathBuf>,
    /// Pre-training samples; facts aligned there are in-domain.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Per-question predictions (JSONL).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Probe reports, one column group each.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Also write the table to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub samples: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    /// N-1 world with templates and facts.
    World,
    /// Adversarial alignment fixture.
    Fixture,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "world")]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 600)]
    pub paragraphs: usize,
}

fn parse_scheme(s: &str) -> Result<MaskScheme, String> {
    s.parse()
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    s.parse()
}

/// Counters for one stage. `processed = emitted + Σ skipped`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCounters {
    pub stage: String,
    pub processed: u64,
    pub emitted: u64,
    pub skipped: BTreeMap<String, u64>,
}

impl StageCounters {
    pub fn is_balanced(&self) -> bool {
        self.processed == self.emitted + self.skipped.values().sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: BTreeMap<String, PathBuf>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub elapsed_ms: u128,
    pub counters: Vec<StageCounters>,
    /// Command-specific extras such as alignment candidate counts.
    #[serde(default)]
    pub extra: serde_json::Value,
}

impl RunManifest {
    fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            seed,
            config: serde_json::Value::Null,
            elapsed_ms: 0,
            counters: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }

    fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.to_string(), path.to_path_buf());
        self
    }

    fn output(mut self, name: &str, path: &Path) -> Self {
        self.outputs.insert(name.to_string(), path.to_path_buf());
        self
    }
}

/// `<path>.manifest.json`, with any trailing separator of `path` ignored.
pub fn manifest_path(output: &Path) -> PathBuf {
    let name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    output.with_file_name(format!("{name}.manifest.json"))
}

pub fn read_manifest(output: &Path) -> anyhow::Result<RunManifest> {
    let path = manifest_path(output);
    let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn write_manifest(output: &Path, m: &RunManifest) -> anyhow::Result<()> {
    let path = manifest_path(output);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, m)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
}

/// Reads every non-blank JSONL line; errors name the file and line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("{}:{}: invalid record", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vocab(path: &Path) -> anyhow::Result<Vocabulary> {
    let tokens = open(path)?
        .lines()
        .collect::<io::Result<Vec<String>>>()
        .with_context(|| format!("reading {}", path.display()))?;
    Vocabulary::from_tokens(tokens).with_context(|| format!("invalid vocabulary {}", path.display()))
}

pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> anyhow::Result<()> {
    let mut w = create(path)?;
    for t in vocab.tokens() {
        writeln!(w, "{t}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> anyhow::Result<Vec<AlignedSample>> {
    read_jsonl::<SampleRecord>(path)?
        .into_iter()
        .map(|r| r.into_sample().map_err(anyhow::Error::from))
        .collect()
}

pub fn read_ssm(path: &Path) -> anyhow::Result<Vec<(Paragraph, Vec<EntityMention>)>> {
    read_jsonl::<SsmRecord>(path)?
        .into_iter()
        .map(|r| r.into_parts().map_err(anyhow::Error::from))
        .collect()
}

/// Lazily parsed corpus; malformed lines surface as `BadRecord`.
pub fn corpus_reader(path: &Path) -> anyhow::Result<impl Iterator<Item = Result<Paragraph, AlignError>>> {
    let reader = open(path)?;
    Ok(reader
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, line)| {
            let bad = |reason: String| AlignError::BadRecord { line: i + 1, reason };
            let line = line.map_err(|e| bad(e.to_string()))?;
            serde_json::from_str::<CorpusRecord>(&line)
                .map_err(|e| bad(e.to_string()))?
                .into_paragraph()
        }))
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

/// Parses `argv` (including the program name) and runs the command.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let start = Instant::now();
    let (primary, mut manifest) = match command {
        Command::BuildKb(a) => cmd_build_kb(a)?,
        Command::Align(a) => cmd_align(a)?,
        Command::Mask(a) => cmd_mask(a)?,
        Command::Train(a) => cmd_train(a)?,
        Command::Probe(a) => cmd_probe(a)?,
        Command::Report(a) => return cmd_report(a).map_err(Failure::from),
        Command::Stats(a) => return cmd_stats(a).map_err(Failure::from),
        Command::Synth(a) => cmd_synth(a)?,
    };
    manifest.elapsed_ms = start.elapsed().as_millis();
    write_manifest(&primary, &manifest)?;
    Ok(())
}

type Outcome = Result<(PathBuf, RunManifest), Failure>;

fn cmd_build_kb(a: BuildKbArgs) -> Outcome {
    let kb = load_kb(open(&a.triplets)?, open(&a.entities)?, open(&a.predicates)?)
        .context("loading knowledge base")?;
    kb.write_dir(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    log::info!("knowledge base: {} triplets", kb.len());
    let mut m = RunManifest::new("build-kb", 0)
        .input("triplets", &a.triplets)
        .input("entities", &a.entities)
        .input("predicates", &a.predicates)
        .output("kb", &a.out);
    m.extra = serde_json::json!({
        "triplets": kb.len(),
        "entities": kb.entity_aliases().len(),
        "predicates": kb.predicate_aliases().len(),
    });
    Ok((a.out, m))
}

#[derive(Debug, Serialize, Deserialize)]
struct AlignExtra {
    candidates: CandidateCounts,
    counters: BuildCounters,
}

fn cmd_align(a: AlignArgs) -> Outcome {
    if a.threads == 0 {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    let kb = KnowledgeBase::load_dir(&a.kb).context("loading knowledge base")?;
    let corpus = corpus_reader(&a.corpus)?;
    let mut samples = create(&a.out)?;
    let mut ssm = a.ssm.as_deref().map(create).transpose()?;
    let mut write_err: Option<anyhow::Error> = None;
    let opts = AlignOptions {
        threads: a.threads,
        ..AlignOptions::default()
    };
    let counters = align_corpus(corpus, &kb, &opts, |s| {
        if write_err.is_some() {
            return;
        }
        let r = (|| -> anyhow::Result<()> {
            if !s.aligned.is_empty() {
                serde_json::to_writer(&mut samples, &SampleRecord::from(s))?;
                samples.write_all(b"\n")?;
            }
            if let Some(w) = ssm.as_mut().filter(|_| !s.entity_spans.is_empty()) {
                serde_json::to_writer(&mut *w, &SsmRecord::from(s))?;
                w.write_all(b"\n")?;
            }
            Ok(())
        })();
        if let Err(e) = r {
            write_err = Some(e);
        }
    });
    if let Some(e) = write_err {
        return Err(e.context("writing samples").into());
    }
    samples.flush()?;
    if let Some(w) = ssm.as_mut() {
        w.flush()?;
    }
    log::info!(
        "aligned {} paragraphs, {} with deterministic triplets",
        counters.paragraphs_read,
        counters.deterministic_paragraphs
    );
    let mut m = RunManifest::new("align", a.seed)
        .input("kb", &a.kb)
        .input("corpus", &a.corpus)
        .output("samples", &a.out);
    if let Some(p) = &a.ssm {
        m = m.output("ssm", p);
    }
    m.config = serde_json::json!({ "threads": a.threads });
    m.counters.push(StageCounters {
        stage: "align".into(),
        processed: counters.paragraphs_read,
        emitted: counters.deterministic_paragraphs,
        skipped: BTreeMap::from([
            ("invalid".to_string(), counters.invalid_paragraphs),
            ("no_deterministic_triplet".to_string(), counters.no_deterministic_triplet),
        ]),
    });
    m.extra = serde_json::to_value(AlignExtra {
        candidates: counters.candidates,
        counters,
    })
    .map_err(anyhow::Error::from)?;
    Ok((a.out, m))
}

fn cmd_mask(a: MaskArgs) -> Outcome {
    let plan = MaskPlan {
        scheme: a.scheme,
        objective: a.objective,
        seed: a.seed,
        max_len: a.max_len,
    };
    if a.max_len == 0 {
        return Err(Failure::Usage("--max-len must be positive".into()));
    }
    let salient = a.scheme == MaskScheme::SalientSpan;
    if salient && a.objective == Objective::ConCls {
        return Err(Failure::Usage("con-cls requires a deterministic scheme".into()));
    }
    let mut m = RunManifest::new("mask", a.seed).output("masked", &a.out);
    let (records, counters, vocab) = if salient {
        let Some(path) = &a.ssm else {
            return Err(Failure::Usage("salient_span requires --ssm".into()));
        };
        m = m.input("ssm", path);
        let paragraphs = read_ssm(path)?;
        let vocab = match &a.vocab {
            Some(v) => read_vocab(v)?,
            None => vocabulary_for(paragraphs.iter().map(|(p, _)| p.text.as_str())),
        };
        let (r, c) = mask_salient(&paragraphs, &vocab, &plan);
        (r, c, vocab)
    } else {
        let Some(path) = &a.samples else {
            return Err(Failure::Usage(format!("{} requires --samples", a.scheme)));
        };
        m = m.input("samples", path);
        let samples = read_samples(path)?;
        let vocab = match &a.vocab {
            Some(v) => read_vocab(v)?,
            None => vocabulary_for(samples.iter().map(|s| s.paragraph.text.as_str())),
        };
        let (r, c) = mask_dataset(&samples, &vocab, &plan);
        (r, c, vocab)
    };
    if let Some(v) = &a.vocab {
        m = m.input("vocab", v);
    }
    write_jsonl(&a.out, &records)?;
    if let Some(p) = &a.vocab_out {
        write_vocab(p, &vocab)?;
        m = m.output("vocab", p);
    }
    m.config = serde_json::json!({
        "scheme": a.scheme,
        "objective": a.objective,
        "max_len": a.max_len,
        "vocab_size": vocab.len(),
    });
    m.counters.push(StageCounters {
        stage: "mask".into(),
        processed: counters.samples,
        emitted: counters.emitted,
        skipped: counters.skipped.clone(),
    });
    m.extra = serde_json::json!({ "records": counters.records });
    Ok((a.out, m))
}

fn cmd_train(a: TrainArgs) -> Outcome {
    let vocab = read_vocab(&a.vocab)?;
    let records: Vec<MaskedRecord> = read_jsonl(&a.masked)?;
    let n_records = records.len() as u64;
    let examples = training_examples(records).context("grouping masked records")?;
    let mut config = ModelConfig::new(vocab.len(), a.d, a.max_len, a.seed)
        .with_lambdas(a.lambda_con, a.lambda_cls);
    if let Some(f) = a.d_ff {
        config.d_ff = f;
    }
    if let Err(e) = config.validate() {
        return Err(Failure::Usage(e.to_string()));
    }
    let opts = TrainOptions {
        steps: a.steps,
        lr: a.lr,
        batch_size: a.batch_size,
    };
    if opts.steps == 0 || opts.batch_size == 0 || !opts.lr.is_finite() {
        return Err(Failure::Usage("--steps and --batch-size must be positive, --lr finite".into()));
    }
    let mut log_file = a.log.as_deref().map(create).transpose()?;
    let state = train(
        config.clone(),
        &examples,
        opts,
        log_file.as_mut().map(|w| w as &mut dyn Write),
    )
    .context("training")?;
    if let Some(w) = log_file.as_mut() {
        w.flush()?;
    }
    save_checkpoint(&a.out, &state, &vocab).context("writing checkpoint")?;
    let mut m = RunManifest::new("train", a.seed)
        .input("masked", &a.masked)
        .input("vocab", &a.vocab)
        .output("model", &a.out);
    if let Some(p) = &a.log {
        m = m.output("log", p);
    }
    m.config = serde_json::json!({ "model": config, "train": opts });
    m.counters.push(StageCounters {
        stage: "train".into(),
        processed: n_records,
        emitted: n_records,
        skipped: BTreeMap::new(),
    });
    m.extra = serde_json::json!({ "examples": examples.len() });
    Ok((a.out, m))
}

#[derive(Debug, Serialize)]
struct PredictionRecord<'a> {
    fact: usize,
    prompt_id: usize,
    prompt: String,
    gold: &'a [String],
    predicted: &'a [String],
}

fn cmd_probe(a: ProbeArgs) -> Outcome {
    let (state, vocab) = load_checkpoint(&a.model).context("loading checkpoint")?;
    let templates = load_templates(open(&a.templates)?)
        .with_context(|| format!("reading {}", a.templates.display()))?;
    let mut facts = load_facts(open(&a.facts)?)
        .with_context(|| format!("reading {}", a.facts.display()))?;
    let kb = match &a.kb {
        Some(dir) => KnowledgeBase::load_dir(dir).context("loading knowledge base")?,
        None => kb_from_facts(&facts)?,
    };
    let pretraining: BTreeSet<Triplet> = match &a.samples {
        Some(p) => read_samples(p)?
            .iter()
            .flat_map(|s| s.aligned.iter().map(|t| t.triplet.clone()))
            .collect(),
        None => BTreeSet::new(),
    };
    split_questions(&mut facts, &kb, &pretraining);
    let all = instantiate_all(&templates, &facts).context("instantiating templates")?;
    let generated = all.len() as u64;
    let (questions, dropped) = filter_leakage(all);
    let predictions = predict_all(&state, &vocab, &questions).context("predicting")?;
    let report = evaluate(&questions, &predictions, &facts).context("scoring")?;
    let mut w = create(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &report).map_err(anyhow::Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    let mut m = RunManifest::new("probe", a.seed)
        .input("model", &a.model)
        .input("templates", &a.templates)
        .input("facts", &a.facts)
        .output("report", &a.out);
    if let Some(p) = &a.kb {
        m = m.input("kb", p);
    }
    if let Some(p) = &a.samples {
        m = m.input("samples", p);
    }
    if let Some(p) = &a.predictions {
        write_jsonl(
            p,
            questions.iter().zip(&predictions).map(|(q, pred)| PredictionRecord {
                fact: q.fact,
                prompt_id: q.prompt_id,
                prompt: q.text(),
                gold: &q.gold,
                predicted: pred,
            }),
        )?;
        m = m.output("predictions", p);
    }
    m.counters.push(StageCounters {
        stage: "leakage_filter".into(),
        processed: generated,
        emitted: questions.len() as u64,
        skipped: BTreeMap::from([("leaked".to_string(), dropped.len() as u64)]),
    });
    Ok((a.out, m))
}

/// Entities and relations implied by the facts alone.
fn kb_from_facts(facts: &[crate::probe::Fact]) -> anyhow::Result<KnowledgeBase> {
    let mut b = KbBuilder::new();
    let mut entities = BTreeSet::new();
    let mut predicates = BTreeSet::new();
    for f in facts {
        let t = &f.triplet;
        for (id, name) in [(&t.subject, &f.subject_surface), (&t.object, &f.object_surface)] {
            if entities.insert(id.clone()) {
                b = b.entity(id.as_str(), name, &[])?;
            }
        }
        if predicates.insert(t.predicate.clone()) {
            b = b.predicate(t.predicate.as_str(), &[t.predicate.as_str()])?;
        }
        b = b.triplet(t.subject.as_str(), t.predicate.as_str(), t.object.as_str())?;
    }
    Ok(b.build()?)
}

/// Acc / Consis / Joint table across reports, one row per split.
pub fn format_report_table(names: &[String], reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<16}", "split"));
    for n in names {
        out.push_str(&format!(" | {:^26}", n));
    }
    out.push('\n');
    out.push_str(&format!("{:<16}", ""));
    for _ in names {
        out.push_str(&format!(" | {:>8} {:>8} {:>8}", "Acc.", "Consis.", "Joint"));
    }
    out.push('\n');
    let rows: [(&str, fn(&MetricsReport) -> &crate::probe::SplitMetrics); 5] = [
        ("total", |r| &r.total),
        ("in-domain", |r| &r.in_domain),
        ("out-of-domain", |r| &r.out_of_domain),
        ("N-1/1-1", |r| &r.n1_or_11),
        ("N-M", |r| &r.nm),
    ];
    for (label, get) in rows {
        out.push_str(&format!("{label:<16}"));
        for r in reports {
            let s = get(r);
            out.push_str(&format!(
                " | {:>8.2} {:>8.2} {:>8.2}",
                100.0 * s.accuracy,
                100.0 * s.consistency,
                100.0 * s.joint
            ));
        }
        out.push('\n');
    }
    out
}

fn cmd_report(a: ReportArgs) -> anyhow::Result<()> {
    let mut reports = Vec::new();
    let mut names = Vec::new();
    for p in &a.reports {
        let r: MetricsReport = serde_json::from_reader(open(p)?)
            .with_context(|| format!("parsing {}", p.display()))?;
        names.push(
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        );
        reports.push(r);
    }
    let table = format_report_table(&names, &reports);
    print!("{table}");
    if let Some(p) = &a.out {
        let mut w = create(p)?;
        w.write_all(table.as_bytes())?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> anyhow::Result<()> {
    let samples = read_samples(&a.samples)?;
    let candidates = match read_manifest(&a.samples) {
        Ok(m) => serde_json::from_value::<AlignExtra>(m.extra)
            .map(|e| e.candidates)
            .unwrap_or_default(),
        Err(e) => {
            log::warn!("no alignment manifest, non-deterministic fraction unavailable: {e:#}");
            CandidateCounts::default()
        }
    };
    let stats = compute_stats(&samples, &candidates)?;
    println!("{stats}");
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Outcome {
    let dir = &a.out;
    let (kb, corpus) = match a.kind {
        SynthKind::World => {
            let w = n1_world(
                a.seed,
                WorldOptions {
                    paragraphs: a.paragraphs,
                    heldout_paragraphs: 0,
                    ..WorldOptions::default()
                },
            );
            write_jsonl(
                &dir.join("templates.jsonl"),
                &w.templates,
            )?;
            write_jsonl(&dir.join("facts.jsonl"), w.facts.iter().map(FactRecord::from_fact))?;
            (w.kb, w.corpus)
        }
        SynthKind::Fixture => {
            let f = random_fixture(
                a.seed,
                FixtureOptions {
                    max_paragraphs: a.paragraphs,
                    ..FixtureOptions::default()
                },
            );
            (f.kb, f.corpus)
        }
    };
    kb.write_dir(dir.join("kb"))
        .with_context(|| format!("writing {}", dir.display()))?;
    write_jsonl(&dir.join("corpus.jsonl"), corpus.iter().map(CorpusRecord::from))?;
    let mut m = RunManifest::new("synth", a.seed).output("dir", dir);
    m.config = serde_json::json!({
        "kind": format!("{:?}", a.kind).to_lowercase(),
        "paragraphs": a.paragraphs,
    });
    m.counters.push(StageCounters {
        stage: "synth".into(),
        processed: corpus.len() as u64,
        emitted: corpus.len() as u64,
        skipped: BTreeMap::new(),
    });
    Ok((dir.clone(), m))
}
