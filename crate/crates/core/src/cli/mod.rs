//! The `stopgen` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 scorer or protocol
//! error. Flags override values from an optional `--config` JSON file.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    build_vocabulary, load_corpus, Corpus, CorpusError, CorpusFormat, LoadOptions,
};
use crate::deletion::{
    self, CheckpointConfig, DeletionEngine, DeletionError, EngineConfig, RankingIoError, Rescoring,
    DEFAULT_CHECKPOINT_EVERY,
};
use crate::eval::{self, EvalConfig, EvalError, ReductionReport, ReportFormat};
use crate::scorer::external::ExternalScorerConfig;
use crate::scorer::{BuiltinScorer, ExternalScorer, LogRegConfig, Scorer, ScorerError};
use crate::stopwords::{self, StopwordError, StopwordList, ENGLISH_BASELINE_NAME};

mod config;

pub use config::Settings;

/// List path that selects the bundled English baseline list.
pub const BUILTIN_LIST: &str = "builtin:english";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Scorer(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Scorer(_) => 3,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<StopwordError> for CliError {
    fn from(e: StopwordError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<RankingIoError> for CliError {
    fn from(e: RankingIoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ScorerError> for CliError {
    fn from(e: ScorerError) -> Self {
        match e {
            ScorerError::EmptyTrainingCorpus
            | ScorerError::SingleClassTraining
            | ScorerError::DimensionMismatch { .. } => CliError::Data(e.to_string()),
            other => CliError::Scorer(other.to_string()),
        }
    }
}

impl From<DeletionError> for CliError {
    fn from(e: DeletionError) -> Self {
        match e {
            DeletionError::Scorer { .. } | DeletionError::Nondeterministic(_) => {
                CliError::Scorer(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "stopgen",
    version,
    about = "Generate task-specific stopword lists from classifier AUC degradation"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Iterative,
    Recursive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Builtin,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Tsv,
    Csv,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Tsv => CorpusFormat::Tsv,
            FormatArg::Csv => CorpusFormat::Csv,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON file with default values for any flag (flags win)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Corpus file format (default: from the file extension, else tsv)
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    /// Name of the text column
    #[arg(long, global = true)]
    pub text_col: Option<String>,
    /// Name of the label column
    #[arg(long, global = true)]
    pub label_col: Option<String>,
    /// Worker threads for the deletion engine (default: available parallelism)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Documents per scorer request
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Checkpoint file for resumable ranking
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Resume from --checkpoint if it exists
    #[arg(long, global = true)]
    pub resume: bool,
    /// Which scorer defines importance
    #[arg(long, global = true, value_enum)]
    pub scorer: Option<ScorerKind>,
    /// Command line of an external scorer (shell-style quoting)
    #[arg(long, global = true)]
    pub scorer_cmd: Option<String>,
    /// Number of external scorer processes
    #[arg(long, global = true)]
    pub pool_size: Option<usize>,
    /// Logistic regression inverse regularization strength
    #[arg(long = "c", global = true)]
    pub c: Option<f64>,
    /// Logistic regression gradient-norm tolerance
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Logistic regression iteration cap
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// More logging (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the vocabulary of a corpus with term and document frequencies
    Vocab(VocabArgs),
    /// Rank tokens by AUC degradation (iterative or recursive deletion)
    Rank(RankArgs),
    /// Cut a stopword list from a ranking, optionally merging other lists
    Stopwords(StopwordsArgs),
    /// Train and benchmark a TF-IDF logistic regression per stopword list
    Evaluate(EvaluateArgs),
    /// Token and character reduction per stopword list and corpus
    ReduceStats(ReduceStatsArgs),
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    /// Corpus file
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Output CSV (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Corpus whose tokens are ranked
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Training corpus for the builtin scorer
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Number of recursive deletion steps
    #[arg(long)]
    pub k: Option<usize>,
    /// Output CSV (a `.meta.json` sidecar is written next to it)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Persist iterative progress every this many tokens
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Rescore the whole corpus for every candidate
    #[arg(long)]
    pub full_rescore: bool,
    /// Warn when recursive deletion is projected to exceed this many document scorings
    #[arg(long)]
    pub budget: Option<u64>,
}

#[derive(Debug, Args)]
pub struct StopwordsArgs {
    /// Ranking or recursive trace CSV
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    /// Number of least important tokens to take
    #[arg(long)]
    pub n: Option<usize>,
    /// Further lists to merge in order (`builtin:english` for the bundled list)
    #[arg(long = "merge")]
    pub merge: Vec<String>,
    /// Merge the bundled English baseline list
    #[arg(long)]
    pub merge_baseline: bool,
    /// Name recorded in the list's provenance sidecar
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Training split
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Evaluation split
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// Stopword list files (`builtin:english` for the bundled list)
    #[arg(long = "list")]
    pub lists: Vec<String>,
    /// Skip the leading no-stopwords baseline row
    #[arg(long)]
    pub no_baseline_row: bool,
    /// Decision threshold for accuracy and F1
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Report CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full JSON report
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReduceStatsArgs {
    /// Corpus files
    #[arg(long = "corpus")]
    pub corpora: Vec<PathBuf>,
    /// Stopword list files (`builtin:english` for the bundled list)
    #[arg(long = "list")]
    pub lists: Vec<String>,
    /// Output CSV (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse arguments, run, and return the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("stopgen: error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let settings = Settings::resolve(&cli.common)?;
    match cli.command {
        Command::Vocab(args) => cmd_vocab(&settings, args),
        Command::Rank(args) => cmd_rank(&settings, args),
        Command::Stopwords(args) => cmd_stopwords(&settings, args),
        Command::Evaluate(args) => cmd_evaluate(&settings, args),
        Command::ReduceStats(args) => cmd_reduce_stats(&settings, args),
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}

fn load(settings: &Settings, path: &Path) -> Result<Corpus, CliError> {
    let format = settings
        .format
        .map(CorpusFormat::from)
        .unwrap_or_else(|| CorpusFormat::from_path(path));
    let options = LoadOptions {
        format,
        text_column: settings.text_col.clone(),
        label_column: settings.label_col.clone(),
    };
    Ok(load_corpus(path, &options)?)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| output_error(p, e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Write `<out>.meta.json` describing the run that produced `out`.
fn write_metadata(out: &Path, meta: serde_json::Value) -> Result<(), CliError> {
    let path = out.with_extension("meta.json");
    let mut json = serde_json::to_vec_pretty(&meta).expect("metadata serializes");
    json.push(b'\n');
    std::fs::write(&path, json).map_err(|e| output_error(&path, e))
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn load_named_list(spec: &str) -> Result<StopwordList, CliError> {
    if spec == BUILTIN_LIST || spec == ENGLISH_BASELINE_NAME {
        return Ok(StopwordList::english_baseline());
    }
    Ok(stopwords::load_list(Path::new(spec))?)
}

pub fn cmd_vocab(settings: &Settings, args: VocabArgs) -> Result<(), CliError> {
    let path = required(args.corpus.or(settings.corpus.clone()), "corpus")?;
    let corpus = load(settings, &path)?;
    let vocab = build_vocabulary(&corpus);
    let out_path = args.out.as_deref();
    let write = || -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(open_output(out_path).map_err(|e| io::Error::other(e.to_string()))?);
        w.write_record(["token", "term_frequency", "document_frequency"])?;
        for e in vocab.entries() {
            w.write_record([
                e.token.clone(),
                e.term_frequency.to_string(),
                e.document_frequency.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| output_error(out_path.unwrap_or(Path::new("<stdout>")), e))?;
    if let Some(out) = out_path {
        write_metadata(
            out,
            serde_json::json!({
                "subcommand": "vocab",
                "corpus": path,
                "corpus_fingerprint": corpus.fingerprint(),
                "documents": corpus.len(),
                "tokens": vocab.len(),
                "settings": settings,
                "deterministic": true,
                "timestamp": timestamp(),
            }),
        )?;
    }
    log::info!("{} tokens in {} documents", vocab.len(), corpus.len());
    Ok(())
}

fn build_scorer(
    settings: &Settings,
    train: Option<&Path>,
) -> Result<(Box<dyn Scorer>, serde_json::Value), CliError> {
    match settings.scorer {
        ScorerKind::Builtin => {
            let path = train.ok_or_else(|| {
                CliError::Usage("the builtin scorer needs a training corpus (--train)".into())
            })?;
            let corpus = load(settings, path)?;
            let scorer = BuiltinScorer::train(&corpus, &settings.logreg())?;
            let info = serde_json::to_value(scorer.info(&corpus)).expect("scorer info serializes");
            Ok((Box::new(scorer), info))
        }
        ScorerKind::External => {
            let raw = settings
                .scorer_cmd
                .as_deref()
                .ok_or_else(|| CliError::Usage("--scorer external needs --scorer-cmd".into()))?;
            let command = shlex::split(raw)
                .filter(|c| !c.is_empty())
                .ok_or_else(|| CliError::Usage(format!("cannot parse --scorer-cmd {raw:?}")))?;
            let config = ExternalScorerConfig::new(command, settings.pool_size);
            let scorer = ExternalScorer::spawn(&config)?;
            let info = serde_json::json!({ "name": scorer.name(), "external": config });
            Ok((Box::new(scorer), info))
        }
    }
}

pub fn cmd_rank(settings: &Settings, args: RankArgs) -> Result<(), CliError> {
    let mode = required(args.mode.or(settings.mode), "mode")?;
    let corpus_path = required(args.corpus.or(settings.corpus.clone()), "corpus")?;
    let out = required(args.out.or(settings.out.clone()), "out")?;
    let train = args.train.or(settings.train.clone());
    let k = args.k.or(settings.k);
    if mode == Mode::Recursive && k.is_none() {
        return Err(CliError::Usage("--mode recursive needs --k".into()));
    }
    if settings.resume && settings.checkpoint.is_none() {
        return Err(CliError::Usage("--resume needs --checkpoint".into()));
    }

    let corpus = load(settings, &corpus_path)?;
    let vocab = build_vocabulary(&corpus);
    let (scorer, scorer_info) = build_scorer(settings, train.as_deref())?;

    let engine = EngineConfig {
        batch_size: settings.batch_size,
        workers: settings.workers,
        rescoring: if args.full_rescore {
            Rescoring::Full
        } else {
            Rescoring::Selective
        },
        checkpoint: settings.checkpoint.as_ref().map(|p| CheckpointConfig {
            path: p.clone(),
            every: args
                .checkpoint_every
                .or(settings.checkpoint_every)
                .unwrap_or(DEFAULT_CHECKPOINT_EVERY)
                .max(1),
            resume: settings.resume,
        }),
        scoring_budget: args.budget.or(settings.budget),
    };
    let run_config = serde_json::json!({
        "subcommand": "rank",
        "mode": mode,
        "corpus": corpus_path,
        "train": train,
        "k": k,
        "out": out,
        "settings": settings,
        "engine": engine,
        "scorer": scorer_info,
        "deterministic": true,
    });
    let engine = DeletionEngine::new(scorer.as_ref(), engine);
    match mode {
        Mode::Iterative => {
            let ranking = engine.iterative(&corpus, &vocab)?;
            deletion::write_ranking(&ranking, &out, Some(&run_config))?;
            log::info!(
                "ranked {} tokens, baseline AUC {:.6}",
                ranking.entries.len(),
                ranking.baseline_auc
            );
        }
        Mode::Recursive => {
            let trace = engine.recursive(&corpus, &vocab, k.unwrap_or_default())?;
            deletion::write_trace(&trace, &out, Some(&run_config))?;
            log::info!(
                "selected {} stopwords, baseline AUC {:.6}",
                trace.steps.len(),
                trace.baseline_auc
            );
        }
    }
    Ok(())
}

/// Load an iterative ranking or recursive trace by its header.
fn load_ranked(path: &Path) -> Result<Box<dyn stopwords::RankedTokens>, CliError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let first = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .get(0)
        .unwrap_or("")
        .to_owned();
    Ok(if first == "step" {
        Box::new(deletion::read_trace_csv(path)?)
    } else {
        Box::new(deletion::read_ranking_csv(path)?)
    })
}

pub fn cmd_stopwords(settings: &Settings, args: StopwordsArgs) -> Result<(), CliError> {
    let ranking_path = required(args.ranking, "ranking")?;
    let n = required(args.n.or(settings.n), "n")?;
    let out = required(args.out.or(settings.out.clone()), "out")?;
    let ranked = load_ranked(&ranking_path)?;
    let mut list = stopwords::from_ranking(ranked.as_ref(), n)?;
    let mut parts = vec![list.clone()];
    for spec in &args.merge {
        parts.push(load_named_list(spec)?);
    }
    if args.merge_baseline {
        parts.push(StopwordList::english_baseline());
    }
    if parts.len() > 1 {
        list = stopwords::merge(&parts);
    }
    if let Some(name) = args.name {
        list.name = name;
    }
    let run_config = serde_json::json!({
        "subcommand": "stopwords",
        "ranking": ranking_path,
        "n": n,
        "merge": args.merge,
        "merge_baseline": args.merge_baseline,
        "out": out,
        "deterministic": true,
        "timestamp": timestamp(),
    });
    stopwords::save_list_with_config(&list, &out, Some(&run_config))?;
    log::info!("wrote {} stopwords to {}", list.len(), out.display());
    Ok(())
}

pub fn cmd_evaluate(settings: &Settings, args: EvaluateArgs) -> Result<(), CliError> {
    let train_path = required(args.train.or(settings.train.clone()), "train")?;
    let eval_path = required(args.eval.or(settings.eval.clone()), "eval")?;
    let out = args.out.or(settings.out.clone());
    if out.is_none() && args.json.is_none() {
        return Err(CliError::Usage("evaluate needs --out and/or --json".into()));
    }
    let train = load(settings, &train_path)?;
    let eval_split = load(settings, &eval_path)?;

    let mut lists = Vec::new();
    if !args.no_baseline_row {
        lists.push(StopwordList::empty("none"));
    }
    for spec in &args.lists {
        lists.push(load_named_list(spec)?);
    }
    if lists.is_empty() {
        return Err(CliError::Usage(
            "nothing to evaluate: pass --list or drop --no-baseline-row".into(),
        ));
    }
    let config = EvalConfig {
        logreg: settings.logreg(),
        threshold: args
            .threshold
            .or(settings.threshold)
            .unwrap_or(crate::metrics::DEFAULT_THRESHOLD),
    };
    let reports: Vec<_> = lists
        .par_iter()
        .map(|l| eval::evaluate_stopword_set(&train, &eval_split, l, &config))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_, _>>()?;
    if let Some(path) = &out {
        eval::emit_reports(&reports, path, ReportFormat::Csv)?;
        write_metadata(
            path,
            serde_json::json!({
                "subcommand": "evaluate",
                "train": train_path,
                "eval": eval_path,
                "lists": args.lists,
                "config": config,
                "settings": settings,
                "deterministic": true,
                "timestamp": timestamp(),
            }),
        )?;
    }
    if let Some(path) = &args.json {
        eval::emit_reports(&reports, path, ReportFormat::Json)?;
    }
    for r in &reports {
        log::info!(
            "{}: accuracy {:.4}, auc {:.4}, train reduction {:.4}",
            r.set_name,
            r.accuracy,
            r.auc,
            r.train_reduction.token_reduction
        );
    }
    Ok(())
}

pub fn cmd_reduce_stats(settings: &Settings, args: ReduceStatsArgs) -> Result<(), CliError> {
    if args.corpora.is_empty() {
        return Err(CliError::Usage(
            "reduce-stats needs at least one --corpus".into(),
        ));
    }
    if args.lists.is_empty() {
        return Err(CliError::Usage(
            "reduce-stats needs at least one --list".into(),
        ));
    }
    let corpora = args
        .corpora
        .iter()
        .map(|p| load(settings, p))
        .collect::<Result<Vec<_>, _>>()?;
    let lists = args
        .lists
        .iter()
        .map(|s| load_named_list(s))
        .collect::<Result<Vec<_>, _>>()?;

    let out_path = args.out.as_deref();
    let write = || -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(open_output(out_path).map_err(|e| io::Error::other(e.to_string()))?);
        w.write_record([
            "set_name",
            "n_tokens",
            "split",
            "tokens_before",
            "tokens_after",
            "token_reduction",
            "chars_before",
            "chars_after",
            "char_reduction",
        ])?;
        for list in &lists {
            let reports: Vec<ReductionReport> =
                corpora.iter().map(|c| eval::reduction(c, list)).collect();
            let mut rows: Vec<ReductionReport> = reports.clone();
            if reports.len() > 1 {
                let mut combined = ReductionReport::combined(&reports.iter().collect::<Vec<_>>());
                combined.split_name = "combined".into();
                rows.push(combined);
            }
            for r in rows {
                w.write_record([
                    list.name.clone(),
                    list.len().to_string(),
                    r.split_name,
                    r.tokens_before.to_string(),
                    r.tokens_after.to_string(),
                    format!("{:.6}", r.token_reduction),
                    r.chars_before.to_string(),
                    r.chars_after.to_string(),
                    format!("{:.6}", r.char_reduction),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| output_error(out_path.unwrap_or(Path::new("<stdout>")), e))?;
    if let Some(out) = out_path {
        write_metadata(
            out,
            serde_json::json!({
                "subcommand": "reduce-stats",
                "corpora": args.corpora,
                "lists": args.lists,
                "settings": settings,
                "deterministic": true,
                "timestamp": timestamp(),
            }),
        )?;
    }
    Ok(())
}

impl Settings {
    pub fn logreg(&self) -> LogRegConfig {
        LogRegConfig {
            c: self.c,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}
