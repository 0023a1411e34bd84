//! Command-line front end: corpus construction, generation, evaluation,
//! reporting, agreement analysis and the annotation server.

pub mod config;
pub mod jsonl;
pub mod manifest;
pub mod server;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dfactscore::analysis::{aggregate, agreement_rate, compare_human_auto, render_csv, render_markdown, TableRow};
use dfactscore::annotation::{
    fact_label_pairs, schedule, task_from_evaluation, AnnotationService, AnnotationTask, ExportRecord,
    DEFAULT_OVERLAP_PERMILLE,
};
use dfactscore::generation::{generate_corpus, DemoKind, DemoSet, Generator, GenerationError, RemoteGenerator, ScriptedGenerator};
use dfactscore::judge::{Judge, JudgeError, RemoteJudge, ScriptedJudge, TranscriptJudge, TranscriptStore};
use dfactscore::knowledge::{build_ambigbio, read_disambig, PassageStore};
use dfactscore::pipeline::{evaluate_corpus, AssignMode, EvalMode, EvalOptions, ParagraphInput, PipelineError, DEFAULT_EVIDENCE_PASSAGES};
use dfactscore::retrieval::{Backend, RetrievalError, Retriever, RetrieverConfig, DEFAULT_K};
use dfactscore::types::{fraction_to_f64, ParagraphReport};
use serde::Serialize;

use crate::config::{overlap_permille, Config};
use crate::manifest::{manifest_beside, RunManifest};

pub const EMBED_ENDPOINT_ENV: &str = "DFS_EMBED_ENDPOINT";

#[derive(Debug, Parser)]
#[command(name = "dfactscore", version, about = "Factual precision scoring with entity disambiguation")]
pub struct Cli {
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a passage store from a `{"title","text"}` JSONL dump.
    Ingest {
        #[arg(long)]
        dump: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample ambiguous names from disambiguation lists.
    Ambigbio {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        disambig: PathBuf,
        #[arg(long)]
        sample: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate cited biographies for names.
    Generate(GenerateArgs),
    /// Score paragraphs.
    Evaluate(EvaluateArgs),
    /// Aggregate reports into a model table.
    Report(ReportArgs),
    /// Correlate human labels with automatic reports.
    Agree {
        #[arg(long)]
        human: PathBuf,
        #[arg(long)]
        auto: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the annotation REST service.
    Serve {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        journal: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DemoChoice {
    With,
    Without,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Names as JSONL with a `name` field, e.g. the output of `ambigbio`.
    #[arg(long)]
    pub names: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "with")]
    pub demos: DemoChoice,
    /// Demonstration file overriding the bundled sets.
    #[arg(long)]
    pub demo_file: Option<PathBuf>,
    /// Scripted generator outputs instead of a remote model.
    #[arg(long)]
    pub scripted: Option<PathBuf>,
    #[arg(long)]
    pub model_tag: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Fs,
    Dfs,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AssignArg {
    Independent,
    Hungarian,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Store directory from `ingest`, or a JSONL dump.
    #[arg(long)]
    pub store: PathBuf,
    /// Paragraphs as JSONL (generation records are accepted).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for reports, per-fact details and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub assign: Option<AssignArg>,
    /// Answer judge requests from a transcript; misses are errors.
    #[arg(long, conflicts_with_all = ["record", "scripted"])]
    pub replay: Option<PathBuf>,
    /// Record every judge exchange to this transcript.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Use a scripted judge instead of the remote one.
    #[arg(long)]
    pub scripted: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub evidence_passages: Option<usize>,
    /// Also write annotation tasks for the evaluated paragraphs.
    #[arg(long)]
    pub emit_tasks: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub annotators: Option<Vec<String>>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableFormat {
    Markdown,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Reports for the left side of each cell (e.g. names with ambiguity).
    #[arg(long = "left", required = true)]
    pub left: Vec<PathBuf>,
    /// Reports for the right side of each cell.
    #[arg(long = "right")]
    pub right: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: TableFormat,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure classes mapped to process exit codes.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let transport_judge = |e: &JudgeError| matches!(e, JudgeError::Transport(_) | JudgeError::RateLimited(_));
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            if e.is_transport() {
                return 2;
            }
        }
        if let Some(e) = cause.downcast_ref::<JudgeError>() {
            if transport_judge(e) {
                return 2;
            }
        }
        if let Some(RetrievalError::EndpointUnreachable(_)) = cause.downcast_ref::<RetrievalError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<GenerationError>() {
            match e {
                GenerationError::Transport(j) if transport_judge(j) => return 2,
                GenerationError::Retrieval(RetrievalError::EndpointUnreachable(_)) => return 2,
                _ => {}
            }
        }
    }
    1
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Ingest { dump, out } => ingest(&dump, &out, cfg_path),
        Command::Ambigbio { store, disambig, sample, seed, out } => {
            let seed = seed.or(config.seed).unwrap_or(0);
            ambigbio(&store, &disambig, sample, seed, &out, cfg_path)
        }
        Command::Generate(args) => generate(&args, &config, cfg_path),
        Command::Evaluate(args) => evaluate(&args, &config, cfg_path),
        Command::Report(args) => report(&args, cfg_path),
        Command::Agree { human, auto, out } => agree(&human, &auto, &out, cfg_path),
        Command::Serve { tasks, journal, addr } => serve(&tasks, &journal, addr),
    }
}

fn open_store(path: &Path) -> anyhow::Result<PassageStore> {
    let store = if path.is_dir() {
        PassageStore::load(path)
    } else {
        PassageStore::ingest_dump_file(path)
    };
    store.with_context(|| format!("loading store {}", path.display()))
}

fn retriever(store: &PassageStore, config: &Config, k: Option<usize>) -> anyhow::Result<Retriever> {
    let backend = config.backend.unwrap_or_default();
    let endpoint = match backend {
        Backend::Lexical => None,
        Backend::EmbeddingService => Some(
            std::env::var(EMBED_ENDPOINT_ENV).with_context(|| format!("{EMBED_ENDPOINT_ENV} is not set"))?,
        ),
    };
    let cfg = RetrieverConfig { backend, k: k.or(config.k).unwrap_or(DEFAULT_K), endpoint };
    Ok(Retriever::new(cfg, store)?)
}

fn ingest(dump: &Path, out: &Path, cfg_path: Option<&Path>) -> anyhow::Result<()> {
    let store = PassageStore::ingest_dump_file(dump).with_context(|| format!("ingesting {}", dump.display()))?;
    store.save(out)?;
    eprintln!("ingested {} pages, {} passages", store.pages().len(), store.passage_count());
    RunManifest::new("ingest", cfg_path)
        .input("dump", dump)
        .output("store", out)
        .option("pages", store.pages().len())
        .option("passages", store.passage_count())
        .write(&out.join("manifest.json"))
}

fn ambigbio(
    store_path: &Path,
    disambig: &Path,
    sample: usize,
    seed: u64,
    out: &Path,
    cfg_path: Option<&Path>,
) -> anyhow::Result<()> {
    let store = open_store(store_path)?;
    let file = std::fs::File::open(disambig).with_context(|| format!("opening {}", disambig.display()))?;
    let entries = read_disambig(std::io::BufReader::new(file))?;
    let corpus = build_ambigbio(&store, &entries, sample, seed)?;
    jsonl::write(out, &corpus.names)?;
    eprintln!(
        "{} of {} eligible names sampled, {:.2} entities per name, {} members dropped",
        corpus.names.len(),
        corpus.eligible,
        corpus.mean_entities_per_name(),
        corpus.dropped_members
    );
    let mut m = RunManifest::new("ambigbio", cfg_path)
        .input("store", store_path)
        .input("disambig", disambig)
        .output("names", out)
        .option("sample", sample)
        .option("eligible", corpus.eligible)
        .option("dropped_members", corpus.dropped_members);
    m.seed = Some(seed);
    m.write(&manifest_beside(out))
}

#[derive(serde::Deserialize)]
struct NameRow {
    name: String,
}

fn generate(args: &GenerateArgs, config: &Config, cfg_path: Option<&Path>) -> anyhow::Result<()> {
    let store = open_store(&args.store)?;
    let retriever = retriever(&store, config, args.k)?;
    let demos = match (&args.demo_file, args.demos) {
        (Some(p), _) => DemoSet::load(p)?,
        (None, DemoChoice::With) => DemoSet::bundled(DemoKind::WithAmbiguity),
        (None, DemoChoice::Without) => DemoSet::bundled(DemoKind::WithoutAmbiguity),
    };
    let names: Vec<String> = jsonl::read::<NameRow>(&args.names)?.into_iter().map(|r| r.name).collect();
    let generator: Box<dyn Generator> = match &args.scripted {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Box::new(serde_json::from_str::<ScriptedGenerator>(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => Box::new(RemoteGenerator::from_env()?),
    };
    let model_tag = args.model_tag.clone().or_else(|| config.model_tag.clone());
    let workers = args.workers.or(config.workers).unwrap_or(1);
    let records =
        generate_corpus(generator.as_ref(), &names, &store, &retriever, &demos, model_tag.as_deref(), workers)?;
    jsonl::write(&args.out, &records)?;
    let mut m = RunManifest::new("generate", cfg_path)
        .input("store", &args.store)
        .input("names", &args.names)
        .output("records", &args.out)
        .option("k", retriever.config().k)
        .option("demos", format!("{:?}", demos.kind).to_lowercase())
        .option("model_tag", &model_tag);
    if let Some(p) = &args.demo_file {
        m = m.input("demo_file", p);
    }
    m.generator = Some(generator.tag());
    m.write(&manifest_beside(&args.out))
}

fn build_judge(args: &EvaluateArgs) -> anyhow::Result<(Box<dyn Judge>, Option<Arc<TranscriptStore>>)> {
    if let Some(t) = &args.replay {
        let store = Arc::new(TranscriptStore::load(t).with_context(|| format!("loading transcript {}", t.display()))?);
        return Ok((Box::new(TranscriptJudge::replay(store)), None));
    }
    let inner: Box<dyn Judge> = match &args.scripted {
        Some(p) => Box::new(ScriptedJudge::load(p)?),
        None => Box::new(RemoteJudge::from_env()?),
    };
    match &args.record {
        Some(t) => {
            let store = Arc::new(TranscriptStore::open_append(t)?);
            Ok((Box::new(TranscriptJudge::record(inner, store.clone())), Some(store)))
        }
        None => Ok((inner, None)),
    }
}

fn evaluate(args: &EvaluateArgs, config: &Config, cfg_path: Option<&Path>) -> anyhow::Result<()> {
    let store = open_store(&args.store)?;
    let retriever = retriever(&store, config, args.k)?;
    let inputs: Vec<ParagraphInput> = jsonl::read(&args.input)?;
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = inputs.iter().find(|p| !seen.insert(p.paragraph_id.as_str())) {
        bail!("duplicate paragraph_id {}", dup.paragraph_id);
    }
    let opts = EvalOptions {
        mode: match args.mode {
            Some(ModeArg::Fs) => EvalMode::Fs,
            Some(ModeArg::Dfs) => EvalMode::Dfs,
            Some(ModeArg::Both) => EvalMode::Both,
            None => config.mode.unwrap_or_default(),
        },
        assign: match args.assign {
            Some(AssignArg::Independent) => AssignMode::Independent,
            Some(AssignArg::Hungarian) => AssignMode::Hungarian,
            None => config.assign.unwrap_or_default(),
        },
        evidence_passages: args.evidence_passages.or(config.evidence_passages).unwrap_or(DEFAULT_EVIDENCE_PASSAGES),
    };
    let workers = args.workers.or(config.workers).unwrap_or(1);
    let (judge, transcript) = build_judge(args)?;
    let evals = evaluate_corpus(&inputs, &store, &retriever, judge.as_ref(), &opts, workers)?;
    if let (Some(t), Some(path)) = (&transcript, &args.record) {
        t.write_sorted(path)?;
    }

    std::fs::create_dir_all(&args.out)?;
    let reports: Vec<&ParagraphReport> = evals.iter().map(|e| &e.report).collect();
    let facts: Vec<_> = evals.iter().flat_map(|e| e.facts.iter()).collect();
    let reports_path = args.out.join("reports.jsonl");
    let facts_path = args.out.join("facts.jsonl");
    jsonl::write(&reports_path, &reports)?;
    jsonl::write(&facts_path, &facts)?;
    let unscorable = reports.iter().filter(|r| !r.is_scorable()).count();
    eprintln!("evaluated {} paragraphs ({} unscorable)", reports.len(), unscorable);

    let mut m = RunManifest::new("evaluate", cfg_path)
        .input("store", &args.store)
        .input("paragraphs", &args.input)
        .output("reports", &reports_path)
        .output("facts", &facts_path)
        .option("mode", opts.mode)
        .option("assign", opts.assign)
        .option("evidence_passages", opts.evidence_passages)
        .option("k", retriever.config().k)
        .option("backend", retriever.config().backend);
    if let Some(p) = &args.replay {
        m = m.input("transcript", p);
    }
    if let Some(p) = &args.scripted {
        m = m.input("judge_script", p);
    }
    if let Some(p) = &args.record {
        m = m.output("transcript", p);
    }
    m.judge = Some(judge.provider_tag());

    if let Some(tasks_path) = &args.emit_tasks {
        let text_of: BTreeMap<&str, &str> = inputs.iter().map(|p| (p.paragraph_id.as_str(), p.text.as_str())).collect();
        let mut tasks = evals
            .iter()
            .filter(|e| !e.candidates.is_empty())
            .map(|e| task_from_evaluation(e, text_of[e.report.paragraph_id.as_str()], &store))
            .collect::<Result<Vec<AnnotationTask>, _>>()?;
        let annotators = args
            .annotators
            .clone()
            .or_else(|| config.annotators.clone())
            .context("--emit-tasks needs annotators (flag or config)")?;
        let permille = args.overlap.or(config.overlap).map_or(DEFAULT_OVERLAP_PERMILLE, overlap_permille);
        let seed = args.seed.or(config.seed).unwrap_or(0);
        schedule(&mut tasks, &annotators, permille, seed)?;
        jsonl::write(tasks_path, &tasks)?;
        m = m.output("tasks", tasks_path).option("overlap_permille", permille).option("annotators", &annotators);
        m.seed = Some(seed);
    }
    m.write(&args.out.join("manifest.json"))
}

fn group_by_model(paths: &[PathBuf]) -> anyhow::Result<BTreeMap<String, Vec<ParagraphReport>>> {
    let mut out: BTreeMap<String, Vec<ParagraphReport>> = BTreeMap::new();
    for p in paths {
        for r in jsonl::read::<ParagraphReport>(p)? {
            out.entry(r.model_tag.clone().unwrap_or_else(|| "unknown".into())).or_default().push(r);
        }
    }
    Ok(out)
}

fn report(args: &ReportArgs, cfg_path: Option<&Path>) -> anyhow::Result<()> {
    let left = group_by_model(&args.left)?;
    let right = group_by_model(&args.right)?;
    let models: std::collections::BTreeSet<&String> = left.keys().chain(right.keys()).collect();
    let summarize = |side: &BTreeMap<String, Vec<ParagraphReport>>, m: &str| -> Option<_> {
        side.get(m).and_then(|r| aggregate(r, m).ok())
    };
    let rows: Vec<TableRow> = models
        .into_iter()
        .map(|m| TableRow { model_tag: m.clone(), left: summarize(&left, m), right: summarize(&right, m) })
        .collect();
    let text = match args.format {
        TableFormat::Markdown => render_markdown(&rows),
        TableFormat::Csv => render_csv(&rows)?,
        TableFormat::Json => serde_json::to_string_pretty(&rows)? + "\n",
    };
    std::fs::write(&args.out, text)?;
    let mut m = RunManifest::new("report", cfg_path).output("table", &args.out).option("format", format!("{:?}", args.format).to_lowercase());
    for (i, p) in args.left.iter().enumerate() {
        m = m.input(&format!("left{i}"), p);
    }
    for (i, p) in args.right.iter().enumerate() {
        m = m.input(&format!("right{i}"), p);
    }
    m.write(&manifest_beside(&args.out))
}

#[derive(Serialize)]
struct AgreementSummary {
    correlations: dfactscore::analysis::CorrelationReport,
    fact_label_pairs: usize,
    fact_label_agreement: Option<f64>,
}

fn agree(human: &Path, auto: &Path, out: &Path, cfg_path: Option<&Path>) -> anyhow::Result<()> {
    let records: Vec<ExportRecord> = jsonl::read(human)?;
    let scores: Vec<_> = records
        .iter()
        .filter_map(|r| match r {
            ExportRecord::Paragraph(h) => Some(h.clone()),
            _ => None,
        })
        .collect();
    let reports: Vec<ParagraphReport> = jsonl::read(auto)?;
    let correlations = compare_human_auto(&scores, &reports)?;
    let pairs = fact_label_pairs(&records);
    let (a, b): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
    let summary = AgreementSummary {
        correlations,
        fact_label_pairs: pairs.len(),
        fact_label_agreement: agreement_rate(&a, &b).ok().map(fraction_to_f64),
    };
    std::fs::write(out, serde_json::to_string_pretty(&summary)? + "\n")?;
    RunManifest::new("agree", cfg_path)
        .input("human", human)
        .input("auto", auto)
        .output("summary", out)
        .write(&manifest_beside(out))
}

fn serve(tasks: &Path, journal: &Path, addr: SocketAddr) -> anyhow::Result<()> {
    let token = std::env::var(server::TOKEN_ENV)
        .ok()
        .filter(|t| !t.is_empty())
        .with_context(|| format!("{} must be set", server::TOKEN_ENV))?;
    let tasks: Vec<AnnotationTask> = jsonl::read(tasks)?;
    let service = Arc::new(AnnotationService::open(tasks, journal)?);
    server::serve(service, &token, addr)
}
