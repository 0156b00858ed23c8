//! Downstream validation of stopword sets: retrain TF-IDF + logistic
//! regression on the reduced training split, benchmark on the reduced
//! evaluation split, and report how much each split shrank.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::metrics::{self, MetricsError, ScoredSet, DEFAULT_THRESHOLD};
use crate::scorer::{BuiltinScorer, LogRegConfig, ScorerError};
use crate::stopwords::{Provenance, StopwordList};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("stopword set {set:?} leaves every {class} document of the {split} split empty")]
    ClassCollapse {
        set: String,
        split: String,
        class: &'static str,
    },
    #[error("the {split} split has a single class")]
    SingleClass { split: String },
    #[error("stopword set {set:?}: {source}")]
    Training {
        set: String,
        #[source]
        source: ScorerError,
    },
    #[error("stopword set {set:?}: {source}")]
    Metrics {
        set: String,
        #[source]
        source: MetricsError,
    },
    #[error("no reports to write")]
    NoReports,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub split_name: String,
    pub tokens_before: u64,
    pub tokens_after: u64,
    pub token_reduction: f64,
    pub chars_before: u64,
    pub chars_after: u64,
    pub char_reduction: f64,
}

fn fraction_removed(before: u64, after: u64) -> f64 {
    if before == 0 {
        0.0
    } else {
        1.0 - after as f64 / before as f64
    }
}

impl ReductionReport {
    fn new(split_name: String, tokens: (u64, u64), chars: (u64, u64)) -> Self {
        Self {
            split_name,
            tokens_before: tokens.0,
            tokens_after: tokens.1,
            token_reduction: fraction_removed(tokens.0, tokens.1),
            chars_before: chars.0,
            chars_after: chars.1,
            char_reduction: fraction_removed(chars.0, chars.1),
        }
    }

    /// Pool several splits into one report.
    pub fn combined(reports: &[&ReductionReport]) -> Self {
        let sum = |f: fn(&ReductionReport) -> u64| reports.iter().map(|r| f(r)).sum::<u64>();
        Self::new(
            reports
                .iter()
                .map(|r| r.split_name.as_str())
                .collect::<Vec<_>>()
                .join("+"),
            (sum(|r| r.tokens_before), sum(|r| r.tokens_after)),
            (sum(|r| r.chars_before), sum(|r| r.chars_after)),
        )
    }
}

/// Exact token and character accounting before and after removing `stopwords`.
pub fn reduction(corpus: &Corpus, stopwords: &StopwordList) -> ReductionReport {
    let reduced = corpus.delete_tokens(stopwords.tokens().iter().map(String::as_str));
    reduction_between(corpus, &reduced)
}

fn reduction_between(before: &Corpus, after: &Corpus) -> ReductionReport {
    ReductionReport::new(
        before.split_name.clone(),
        (before.token_count() as u64, after.token_count() as u64),
        (before.char_count() as u64, after.char_count() as u64),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub logreg: LogRegConfig,
    pub threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            logreg: LogRegConfig::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub set_name: String,
    pub n_tokens: usize,
    pub provenance: Provenance,
    pub accuracy: f64,
    pub auc: f64,
    pub f1: f64,
    pub train_reduction: ReductionReport,
    pub eval_reduction: ReductionReport,
    pub combined_reduction: ReductionReport,
    pub train_features: usize,
    pub config: EvalConfig,
}

fn check_collapse(set: &str, original: &Corpus, reduced: &Corpus) -> Result<(), EvalError> {
    let (pos, neg) = original.class_counts();
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass {
            split: original.split_name.clone(),
        });
    }
    let emptied = |label: u8| {
        reduced
            .documents()
            .iter()
            .filter(|d| d.label == label)
            .all(|d| d.tokens.is_empty())
    };
    // Emptying both classes leaves a bias-only model, which is a valid
    // (degenerate) evaluation. Emptying exactly one class lets the model
    // separate by emptiness alone.
    match (emptied(1), emptied(0)) {
        (true, false) => Err(EvalError::ClassCollapse {
            set: set.to_owned(),
            split: original.split_name.clone(),
            class: "positive",
        }),
        (false, true) => Err(EvalError::ClassCollapse {
            set: set.to_owned(),
            split: original.split_name.clone(),
            class: "negative",
        }),
        _ => Ok(()),
    }
}

/// Train on `train` minus the stopwords and benchmark on `eval` minus the
/// stopwords.
pub fn evaluate_stopword_set(
    train: &Corpus,
    eval: &Corpus,
    stopwords: &StopwordList,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    let set = stopwords.name.clone();
    let removed: HashSet<&str> = stopwords.tokens().iter().map(String::as_str).collect();
    let reduced_train = train.delete_tokens(removed.iter().copied());
    let reduced_eval = eval.delete_tokens(removed.iter().copied());
    check_collapse(&set, train, &reduced_train)?;
    check_collapse(&set, eval, &reduced_eval)?;

    let scorer = BuiltinScorer::train(&reduced_train, &config.logreg).map_err(|source| {
        EvalError::Training {
            set: set.clone(),
            source,
        }
    })?;
    let scores: Vec<f64> = reduced_eval
        .documents()
        .iter()
        .map(|d| scorer.score_tokens(&d.tokens))
        .collect();
    let labels = reduced_eval.labels();
    let metric_err = |source| EvalError::Metrics {
        set: set.clone(),
        source,
    };
    let scored = ScoredSet::new(&scores, &labels).map_err(metric_err)?;
    let auc = metrics::roc_auc(&scored).map_err(metric_err)?;

    let train_reduction = reduction_between(train, &reduced_train);
    let eval_reduction = reduction_between(eval, &reduced_eval);
    let combined_reduction = ReductionReport::combined(&[&train_reduction, &eval_reduction]);
    Ok(EvalReport {
        set_name: set.clone(),
        n_tokens: stopwords.len(),
        provenance: stopwords.provenance.clone(),
        accuracy: metrics::accuracy(&scored, config.threshold),
        auc,
        f1: metrics::f1(&scored, config.threshold),
        train_reduction,
        eval_reduction,
        combined_reduction,
        train_features: scorer.vectorizer().dim(),
        config: config.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const REPORT_CSV_HEADER: [&str; 9] = [
    "set_name",
    "n_tokens",
    "accuracy",
    "auc",
    "f1",
    "train_token_reduction",
    "eval_token_reduction",
    "train_char_reduction",
    "eval_char_reduction",
];

/// CSV with 6-decimal floats (RFC 4180 quoting, LF line endings).
pub fn write_reports_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(REPORT_CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.set_name.clone(),
            r.n_tokens.to_string(),
            format!("{:.6}", r.accuracy),
            format!("{:.6}", r.auc),
            format!("{:.6}", r.f1),
            format!("{:.6}", r.train_reduction.token_reduction),
            format!("{:.6}", r.eval_reduction.token_reduction),
            format!("{:.6}", r.train_reduction.char_reduction),
            format!("{:.6}", r.eval_reduction.char_reduction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_reports(
    reports: &[EvalReport],
    path: &Path,
    format: ReportFormat,
) -> Result<(), EvalError> {
    if reports.is_empty() {
        return Err(EvalError::NoReports);
    }
    let io_err = |source| EvalError::Io {
        path: path.to_owned(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    match format {
        ReportFormat::Csv => write_reports_csv(reports, &mut out).map_err(|e| io_err(e.into()))?,
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, reports).map_err(|e| io_err(e.into()))?;
            out.write_all(b"\n").map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

pub fn read_reports_json(path: &Path) -> Result<Vec<EvalReport>, EvalError> {
    let file = File::open(path).map_err(|source| EvalError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| EvalError::Io {
        path: path.to_owned(),
        source: e.into(),
    })
}
