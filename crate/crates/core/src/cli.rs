//! The `lrnlu` command line.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error, 3 model-bridge failure.
//! Diagnostics go to standard error; data goes to standard output or `--out`.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::augment::{augment_manifest, AugmentConfig, AugmentError, AugmentedSample};
use crate::config::PipelineConfig;
use crate::dataset::{self, load_any, load_tsv, upsample_mix, write_jsonl, Manifest, TsvOptions};
use crate::io::write_atomic;
use crate::metrics::{corpus_em, corpus_wer, EmReport, WerReport};
use crate::oracle::{
    LexiconProposer, MemorizingOracle, OracleError, ParserOracle, RemoteClient, RemoteConfig, TokenProposer,
};
use crate::retrieval::{
    build_prompts, query, PromptConfig, PromptMode, TfidfIndex, DEFAULT_K, DEFAULT_P_GEOM, DEFAULT_SEPARATOR,
};
use crate::top::Utterance;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_REMOTE: i32 = 3;

/// Printed by `--version`; the index format must match `INDEX_FORMAT_VERSION`.
pub const LONG_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (index format 1)");

const DEFAULT_BRIDGE_URL: &str = "http://127.0.0.1:8080";
const DEFAULT_MIX_FACTOR: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "lrnlu", version = LONG_VERSION, about = "Low-resource NLU data pipeline")]
struct Cli {
    /// JSON config file; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a manifest (.jsonl or .tsv) and report problems.
    Validate {
        manifest: PathBuf,
        #[command(flatten)]
        ingest: IngestArgs,
    },
    /// Per-domain and per-split counts.
    Stats {
        manifest: PathBuf,
        #[command(flatten)]
        ingest: IngestArgs,
    },
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Mix held-in data with upsampled low-resource data.
    Mix {
        #[arg(long)]
        held_in: Option<PathBuf>,
        #[arg(long)]
        low: PathBuf,
        #[arg(long)]
        factor: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        ingest: IngestArgs,
    },
    /// Masked-LM augmentation with oracle filtering.
    Augment(AugmentArgs),
    #[command(subcommand)]
    Index(IndexCommand),
    #[command(subcommand)]
    Prompt(PromptCommand),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Skip malformed TSV rows instead of aborting.
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Exact-match accuracy of parses (one per line, or `parse` of JSONL records).
    Em {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Word error rate of transcripts (one per line, or `utterance` of JSONL records).
    Wer {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Mask plans per source sample.
    #[arg(long)]
    factor: Option<usize>,
    /// `lexicon:<table.json>` or `remote`.
    #[arg(long)]
    proposer: Option<String>,
    /// `memorizing` (the input manifest), `memorizing:<manifest>`, or `remote`.
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    proposals_per_mask: Option<usize>,
    #[arg(long)]
    bridge_url: Option<String>,
    /// Maximum in-flight bridge requests.
    #[arg(long)]
    concurrency: Option<usize>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Kept samples (JSONL).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Verdict counts (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Every candidate with its verdict (JSONL).
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[command(flatten)]
    ingest: IngestArgs,
}

#[derive(Debug, Subcommand)]
enum IndexCommand {
    /// Build a TF-IDF index over a manifest's utterances.
    Build {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        ingest: IngestArgs,
    },
    /// Print the top hits for a text as JSONL.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long)]
        k: Option<usize>,
        /// Sample ids to leave out.
        #[arg(long)]
        exclude: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Sample,
    Topk,
}

#[derive(Debug, Subcommand)]
enum PromptCommand {
    /// Render exemplar-augmented inputs as JSONL.
    Render {
        /// Exemplar source (the indexed training data).
        #[arg(long)]
        corpus: PathBuf,
        /// Prebuilt index over `--corpus`; built on the fly when absent.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Samples to render prompts for; defaults to `--corpus`.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "topk")]
        mode: ModeArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        p_geom: Option<f64>,
        #[arg(long)]
        separator: Option<String>,
        /// Independent exemplar draws per sample.
        #[arg(long)]
        resample_epochs: Option<usize>,
        /// Leave each sample's own id out of its candidates (default: sample mode only).
        #[arg(long)]
        exclude_self: Option<bool>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        ingest: IngestArgs,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Remote(anyhow::Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Remote(_) => EXIT_REMOTE,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Remote(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("LRNLU_LOG")
        .target(env_logger::Target::Stderr)
        .try_init();

    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("lrnlu: error: {:#}", f.error());
            f.code()
        }
    }
}

struct Ctx {
    cfg: PipelineConfig,
    jobs: Option<usize>,
}

impl Ctx {
    fn tsv_options(&self, ingest: &IngestArgs) -> TsvOptions {
        let mut opts = TsvOptions {
            strict: !ingest.lenient && self.cfg.strict.unwrap_or(true),
            ..TsvOptions::default()
        };
        if let Some(cols) = &self.cfg.tsv_columns {
            if let Some(c) = &cols.utterance {
                opts.utterance_column = c.clone();
            }
            if let Some(c) = &cols.parse {
                opts.parse_column = c.clone();
            }
            if let Some(c) = &cols.domain {
                opts.domain_column = c.clone();
            }
        }
        opts
    }

    fn load(&self, path: &Path, ingest: &IngestArgs) -> Result<Manifest, Failure> {
        load_any(path, &self.tsv_options(ingest))
            .with_context(|| format!("loading {}", path.display()))
            .map_err(Failure::Data)
    }
}

fn dispatch(cli: Cli) -> CmdResult {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).map_err(|e| Failure::Usage(e.into()))?,
        None => PipelineConfig::default(),
    };
    if cli.jobs == Some(0) {
        return Err(usage("--jobs must be at least 1"));
    }
    let ctx = Ctx {
        jobs: cli.jobs.or(cfg.jobs),
        cfg,
    };
    match cli.command {
        Command::Validate { manifest, ingest } => cmd_validate(&ctx, &manifest, &ingest),
        Command::Stats { manifest, ingest } => {
            let m = ctx.load(&manifest, &ingest)?;
            print_json_line(&dataset::stats(&m))
        }
        Command::Eval(EvalCommand::Em { hyp, reference }) => cmd_eval_em(&hyp, &reference),
        Command::Eval(EvalCommand::Wer { hyp, reference }) => cmd_eval_wer(&hyp, &reference),
        Command::Mix {
            held_in,
            low,
            factor,
            seed,
            out,
            ingest,
        } => {
            let factor = factor.or(ctx.cfg.upsample_factor).unwrap_or(DEFAULT_MIX_FACTOR);
            if factor == 0 {
                return Err(usage("--factor must be at least 1"));
            }
            let seed = seed.or(ctx.cfg.seed).unwrap_or(0);
            let held = match held_in {
                Some(p) => ctx.load(&p, &ingest)?,
                None => Manifest::default(),
            };
            let low = ctx.load(&low, &ingest)?;
            let mixed = upsample_mix(&held, &low, factor, seed).context("mixing manifests")?;
            log::info!(
                "mixed {} held-in + {}x{} low-resource samples",
                held.len(),
                factor,
                low.len()
            );
            emit(out.as_deref(), |w| write_jsonl(&mixed, w))
        }
        Command::Augment(args) => cmd_augment(&ctx, args),
        Command::Index(IndexCommand::Build { manifest, out, ingest }) => {
            let m = ctx.load(&manifest, &ingest)?;
            let index = TfidfIndex::<f64>::build(&m).context("building index")?;
            let empty = index.empty_documents();
            if !empty.is_empty() {
                log::warn!("{} documents have no indexed terms", empty.len());
            }
            index.save(&out).context("saving index")?;
            log::info!("indexed {} documents, {} terms", index.len(), index.vocabulary_size());
            Ok(())
        }
        Command::Index(IndexCommand::Query {
            index,
            text,
            k,
            exclude,
        }) => {
            let k = k.or(ctx.cfg.k).unwrap_or(DEFAULT_K);
            if k == 0 {
                return Err(usage("--k must be at least 1"));
            }
            let index = TfidfIndex::<f64>::load(&index).context("loading index")?;
            let x = Utterance::parse(&text).map_err(|e| usage(format!("--text: {e}")))?;
            let exclude: HashSet<String> = exclude.into_iter().collect();
            let hits = query(&index, &x, k, &exclude);
            emit(None, |w| {
                for h in &hits {
                    writeln!(w, "{}", serde_json::to_string(h)?)?;
                }
                Ok(())
            })
        }
        Command::Prompt(PromptCommand::Render {
            corpus,
            index,
            manifest,
            mode,
            seed,
            k,
            p_geom,
            separator,
            resample_epochs,
            exclude_self,
            out,
            ingest,
        }) => {
            let cfg = PromptConfig {
                mode: match mode {
                    ModeArg::Sample => PromptMode::Sample,
                    ModeArg::Topk => PromptMode::TopK,
                },
                k: k.or(ctx.cfg.k).unwrap_or(DEFAULT_K),
                p_geom: p_geom.or(ctx.cfg.p_geom).unwrap_or(DEFAULT_P_GEOM),
                separator: separator
                    .or_else(|| ctx.cfg.separator.clone())
                    .unwrap_or_else(|| DEFAULT_SEPARATOR.to_string()),
                seed: seed.or(ctx.cfg.seed).unwrap_or(0),
                exclude_self,
                epochs: resample_epochs.or(ctx.cfg.resample_epochs).unwrap_or(1),
                jobs: ctx.jobs,
            };
            if cfg.k == 0 || cfg.epochs == 0 {
                return Err(usage("--k and --resample-epochs must be at least 1"));
            }
            if !(cfg.p_geom > 0.0 && cfg.p_geom < 1.0) {
                return Err(usage("--p-geom must lie strictly between 0 and 1"));
            }
            if cfg.separator.is_empty() {
                return Err(usage("--separator must not be empty"));
            }
            let corpus_m = ctx.load(&corpus, &ingest)?;
            let queries = match manifest {
                Some(p) => ctx.load(&p, &ingest)?,
                None => corpus_m.clone(),
            };
            let index = match index {
                Some(p) => TfidfIndex::<f64>::load(&p).context("loading index")?,
                None => TfidfIndex::<f64>::build(&corpus_m).context("building index")?,
            };
            let records = build_prompts(&index, &corpus_m, &queries, &cfg).context("rendering prompts")?;
            emit(out.as_deref(), |w| {
                for r in &records {
                    writeln!(w, "{}", serde_json::to_string(r)?)?;
                }
                Ok(())
            })
        }
    }
}

fn cmd_validate(ctx: &Ctx, path: &Path, ingest: &IngestArgs) -> CmdResult {
    let is_tsv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("tsv"));
    let (manifest, skipped) = if is_tsv {
        let load =
            load_tsv(path, &ctx.tsv_options(ingest)).with_context(|| format!("validating {}", path.display()))?;
        (load.manifest, load.skipped)
    } else {
        let m = dataset::load_jsonl(path).with_context(|| format!("validating {}", path.display()))?;
        (m, Vec::new())
    };
    print_json_line(&json!({
        "samples": manifest.len(),
        "skipped": skipped.len(),
        "errors": skipped.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
    }))?;
    if skipped.is_empty() {
        Ok(())
    } else {
        Err(Failure::Data(anyhow!("{} malformed rows skipped", skipped.len())))
    }
}

/// One field per record: plain lines, or `field` of each JSONL object.
fn read_column(path: &Path, field: &str) -> anyhow::Result<Vec<String>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let jsonl = path.extension().and_then(|e| e.to_str()) == Some("jsonl");
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        if !jsonl {
            out.push(line);
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(&line).with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        match v.get(field) {
            Some(serde_json::Value::String(s)) => out.push(s.clone()),
            Some(serde_json::Value::Null) => out.push(String::new()),
            _ => bail!("{}: line {}: missing string field `{field}`", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn paired_columns(hyp: &Path, reference: &Path, field: &str) -> anyhow::Result<Vec<(String, String)>> {
    let h = read_column(hyp, field)?;
    let r = read_column(reference, field)?;
    if h.len() != r.len() {
        bail!(
            "{} has {} entries but {} has {}",
            hyp.display(),
            h.len(),
            reference.display(),
            r.len()
        );
    }
    Ok(h.into_iter().zip(r).collect())
}

fn cmd_eval_em(hyp: &Path, reference: &Path) -> CmdResult {
    let pairs = paired_columns(hyp, reference, "parse")?;
    let report: EmReport<f64> = corpus_em(&pairs).context("exact match")?;
    print_json_line(&report)
}

fn cmd_eval_wer(hyp: &Path, reference: &Path) -> CmdResult {
    let pairs = paired_columns(hyp, reference, "utterance")?
        .into_iter()
        .enumerate()
        .map(|(i, (h, r))| {
            let parse = |s: &str| Utterance::parse(s).with_context(|| format!("entry {}", i + 1));
            Ok((parse(&h)?, parse(&r)?))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let report: WerReport<f64> = corpus_wer(&pairs).context("word error rate")?;
    print_json_line(&report)
}

enum ProposerSpec {
    Lexicon(PathBuf),
    Remote,
}

enum OracleSpec {
    Memorizing(Option<PathBuf>),
    Remote,
}

fn parse_proposer(spec: &str) -> Result<ProposerSpec, Failure> {
    match spec.split_once(':') {
        Some(("lexicon", path)) if !path.is_empty() => Ok(ProposerSpec::Lexicon(path.into())),
        None if spec == "remote" => Ok(ProposerSpec::Remote),
        _ => Err(usage(format!(
            "unknown proposer `{spec}` (expected `lexicon:<path>` or `remote`)"
        ))),
    }
}

fn parse_oracle(spec: &str) -> Result<OracleSpec, Failure> {
    match spec.split_once(':') {
        Some(("memorizing", path)) if !path.is_empty() => Ok(OracleSpec::Memorizing(Some(path.into()))),
        None if spec == "memorizing" => Ok(OracleSpec::Memorizing(None)),
        None if spec == "remote" => Ok(OracleSpec::Remote),
        _ => Err(usage(format!(
            "unknown oracle `{spec}` (expected `memorizing`, `memorizing:<path>` or `remote`)"
        ))),
    }
}

#[derive(Serialize)]
struct CandidateRecord<'a> {
    id: String,
    source_id: &'a str,
    x_aug: String,
    y_aug: String,
    verdict: Option<crate::augment::FilterVerdict>,
    positions: &'a [usize],
    replacements: &'a [crate::augment::Replacement],
    p: f64,
}

impl<'a> From<&'a AugmentedSample> for CandidateRecord<'a> {
    fn from(c: &'a AugmentedSample) -> Self {
        CandidateRecord {
            id: c.id(),
            source_id: &c.source_id,
            x_aug: c.x_aug.to_string(),
            y_aug: c.y_aug.serialize(),
            verdict: c.filter_verdict,
            positions: &c.plan.positions,
            replacements: &c.replacements,
            p: c.plan.p,
        }
    }
}

fn cmd_augment(ctx: &Ctx, args: AugmentArgs) -> CmdResult {
    let cfg = &ctx.cfg;
    let factor = args.factor.or(cfg.mask_factor).unwrap_or(1);
    let per_mask = args.proposals_per_mask.or(cfg.proposals_per_mask).unwrap_or(1);
    if factor == 0 || per_mask == 0 {
        return Err(usage("--factor and --proposals-per-mask must be at least 1"));
    }
    let proposer_spec = parse_proposer(
        args.proposer
            .as_deref()
            .or(cfg.proposer.as_deref())
            .ok_or_else(|| usage("--proposer is required"))?,
    )?;
    let oracle_spec = parse_oracle(args.oracle.as_deref().or(cfg.oracle.as_deref()).unwrap_or("memorizing"))?;
    let timeout = args.timeout.or(cfg.timeout_secs).unwrap_or(30.0);
    if !(timeout > 0.0 && timeout.is_finite()) {
        return Err(usage("--timeout must be a positive number of seconds"));
    }
    let concurrency = args.concurrency.or(cfg.concurrency).unwrap_or(8);
    if concurrency == 0 {
        return Err(usage("--concurrency must be at least 1"));
    }

    let manifest = ctx.load(&args.manifest, &args.ingest)?;

    let remote = || {
        Arc::new(RemoteClient::new(RemoteConfig {
            base_url: args
                .bridge_url
                .clone()
                .or_else(|| cfg.bridge_url.clone())
                .unwrap_or_else(|| DEFAULT_BRIDGE_URL.to_string()),
            timeout: Duration::from_secs_f64(timeout),
            max_in_flight: concurrency,
            retries: cfg.retries.unwrap_or(2),
        }))
    };
    let mut shared: Option<Arc<RemoteClient>> = None;
    let mut client = || shared.get_or_insert_with(remote).clone();

    let proposer: Box<dyn TokenProposer> = match proposer_spec {
        ProposerSpec::Lexicon(path) => Box::new(
            LexiconProposer::from_json_file(&path)
                .map_err(|e| Failure::Data(anyhow!(e).context(format!("loading lexicon {}", path.display()))))?,
        ),
        ProposerSpec::Remote => Box::new(ArcProposer(client())),
    };
    let oracle: Box<dyn ParserOracle> = match oracle_spec {
        OracleSpec::Memorizing(None) => Box::new(MemorizingOracle::from_manifest(&manifest)),
        OracleSpec::Memorizing(Some(path)) => {
            let memory = ctx.load(&path, &args.ingest)?;
            Box::new(MemorizingOracle::from_manifest(&memory))
        }
        OracleSpec::Remote => Box::new(ArcOracle(client())),
    };
    if let Some(c) = &shared {
        let health = c
            .health()
            .map_err(|e| Failure::Remote(anyhow!(e).context("model bridge health check")))?;
        log::info!(
            "bridge status {} (proposer {:?}, parser {:?})",
            health.status,
            health.proposer,
            health.parser
        );
    }

    let aug_cfg = AugmentConfig {
        factor,
        seed: args.seed.or(cfg.seed).unwrap_or(0),
        proposals_per_mask: per_mask,
        jobs: ctx.jobs,
    };
    let outcome = augment_manifest(&manifest, &*proposer, &*oracle, &aug_cfg).map_err(|e| match e {
        AugmentError::Oracle(o) if o.is_unavailable() => Failure::Remote(anyhow!(o).context("augmenting")),
        other => Failure::Data(anyhow!(other).context("augmenting")),
    })?;
    log::info!("{} candidates, {} kept", outcome.report.candidates, outcome.report.kept);

    if let Some(path) = &args.candidates {
        write_atomic(path, |w| {
            for c in &outcome.candidates {
                writeln!(w, "{}", serde_json::to_string(&CandidateRecord::from(c))?)?;
            }
            Ok(())
        })
        .with_context(|| format!("writing {}", path.display()))?;
    }
    let report_json = serde_json::to_string(&outcome.report).context("serializing report")?;
    match &args.report {
        Some(path) => write_atomic(path, |w| writeln!(w, "{report_json}"))
            .with_context(|| format!("writing {}", path.display()))?,
        None if args.out.is_some() => println!("{report_json}"),
        None => eprintln!("{report_json}"),
    }
    emit(args.out.as_deref(), |w| write_jsonl(&outcome.manifest, w))
}

struct ArcProposer(Arc<RemoteClient>);

impl TokenProposer for ArcProposer {
    fn propose(
        &self,
        query: &crate::oracle::MaskQuery,
        top_k: usize,
    ) -> Result<Vec<Vec<crate::oracle::Proposal>>, OracleError> {
        self.0.propose(query, top_k)
    }
}

struct ArcOracle(Arc<RemoteClient>);

impl ParserOracle for ArcOracle {
    fn parse(&self, utterance: &str) -> Result<Option<String>, OracleError> {
        ParserOracle::parse(&*self.0, utterance)
    }
}

fn print_json_line<T: Serialize>(value: &T) -> CmdResult {
    let line = serde_json::to_string(value).context("serializing output")?;
    emit(None, |w| writeln!(w, "{line}"))
}

/// Writes to `path` atomically, or to standard output.
fn emit<F>(path: Option<&Path>, write: F) -> CmdResult
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match path {
        Some(p) => write_atomic(p, write).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).context("writing to stdout")?;
            lock.flush().context("flushing stdout")?;
        }
    }
    Ok(())
}
