//! The probabilistic model whose AUC degradation defines token importance.
//!
//! Anything implementing [`Scorer`] can drive the deletion engine. Two
//! implementations ship here: [`BuiltinScorer`] (TF-IDF + logistic
//! regression, in process) and [`ExternalScorer`] (a pool of child
//! processes speaking newline-delimited JSON).

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{tokenize, Corpus};

pub mod external;
pub mod logreg;
pub mod tfidf;

pub use external::{ExternalScorer, ExternalScorerConfig};
pub use logreg::{train_logreg, train_logreg_from, LogRegConfig, LogRegModel, LogisticObjective};
pub use tfidf::{CsrMatrix, SparseVector, TfidfVectorizer};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("cannot fit TF-IDF on an empty corpus")]
    EmptyTrainingCorpus,
    #[error("training labels contain a single class")]
    SingleClassTraining,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("scorer returned {found} scores for {expected} texts")]
    WrongLength { expected: usize, found: usize },
    #[error("scorer returned invalid score {value} at position {index}")]
    InvalidScore { index: usize, value: f64 },
    #[error("failed to spawn scorer {command:?}: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scorer child {child} (pid {pid}) did not send a ready message within {seconds} s")]
    ReadyTimeout {
        child: usize,
        pid: u32,
        seconds: u64,
    },
    #[error("scorer child {child} (pid {pid}): protocol violation{}: {message}", request_suffix(*.request_id))]
    Protocol {
        child: usize,
        pid: u32,
        request_id: Option<u64>,
        message: String,
    },
    #[error(
        "scorer child {child} (pid {pid}) reported an error for request {request_id}: {message}"
    )]
    Remote {
        child: usize,
        pid: u32,
        request_id: u64,
        message: String,
    },
    #[error("scorer child {child} (pid {pid}) exited mid-session{}", request_suffix(*.request_id))]
    ChildExited {
        child: usize,
        pid: u32,
        request_id: Option<u64>,
    },
    #[error("scorer child {child} (pid {pid}) I/O error: {source}")]
    Io {
        child: usize,
        pid: u32,
        #[source]
        source: std::io::Error,
    },
}

fn request_suffix(id: Option<u64>) -> String {
    id.map(|id| format!(" (request id {id})"))
        .unwrap_or_default()
}

/// A deterministic text -> P(label = 1) model.
///
/// Identical inputs must yield identical outputs, and every score must lie
/// in [0, 1]. The deletion engine relies on both.
pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;

    /// Whether `score_batch` may be called from several threads at once.
    fn concurrency_safe(&self) -> bool {
        true
    }

    /// Upper bound on useful concurrent calls; `None` means unbounded.
    fn max_parallelism(&self) -> Option<usize> {
        None
    }

    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>, ScorerError>;
}

impl<T: Scorer + ?Sized> Scorer for Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn concurrency_safe(&self) -> bool {
        (**self).concurrency_safe()
    }
    fn max_parallelism(&self) -> Option<usize> {
        (**self).max_parallelism()
    }
    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        (**self).score_batch(texts)
    }
}

impl<T: Scorer + ?Sized> Scorer for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn concurrency_safe(&self) -> bool {
        (**self).concurrency_safe()
    }
    fn max_parallelism(&self) -> Option<usize> {
        (**self).max_parallelism()
    }
    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        (**self).score_batch(texts)
    }
}

/// Check a response against its request.
pub fn validate_scores(expected: usize, scores: &[f64]) -> Result<(), ScorerError> {
    if scores.len() != expected {
        return Err(ScorerError::WrongLength {
            expected,
            found: scores.len(),
        });
    }
    if let Some((index, &value)) = scores
        .iter()
        .enumerate()
        .find(|(_, s)| !(0.0..=1.0).contains(*s))
    {
        return Err(ScorerError::InvalidScore { index, value });
    }
    Ok(())
}

/// TF-IDF + logistic regression trained on a labeled corpus.
#[derive(Debug, Clone)]
pub struct BuiltinScorer {
    name: String,
    vectorizer: TfidfVectorizer,
    model: LogRegModel,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BuiltinScorerInfo {
    pub name: String,
    pub train_split: String,
    pub train_fingerprint: String,
    pub features: usize,
    pub config: LogRegConfig,
    pub training: logreg::TrainInfo,
}

impl BuiltinScorer {
    pub fn train(corpus: &Corpus, config: &LogRegConfig) -> Result<Self, ScorerError> {
        let vectorizer = TfidfVectorizer::fit(corpus)?;
        let features = vectorizer.transform_corpus(corpus);
        let model = train_logreg(&features, &corpus.labels(), config)?;
        if !model.info.converged {
            log::warn!(
                "logistic regression stopped after {} iterations with gradient norm {:.3e}",
                model.info.iterations,
                model.info.gradient_norm
            );
        }
        // The name pins the training data and hyperparameters, so checkpoint
        // fingerprints change whenever the model would.
        let mut hasher = Sha256::new();
        hasher.update(corpus.fingerprint().as_bytes());
        hasher.update(serde_json::to_vec(config).expect("config serializes"));
        let digest = hex::encode(hasher.finalize());
        Ok(Self {
            name: format!("builtin-tfidf-logreg:{}", &digest[..16]),
            vectorizer,
            model,
        })
    }

    pub fn vectorizer(&self) -> &TfidfVectorizer {
        &self.vectorizer
    }

    pub fn model(&self) -> &LogRegModel {
        &self.model
    }

    pub fn score_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> f64 {
        let x = self.vectorizer.transform(tokens);
        self.model
            .predict_proba(&x)
            .expect("vectorizer and model dimensions agree")
    }

    pub fn score_text(&self, text: &str) -> f64 {
        self.score_tokens(&tokenize(text))
    }

    pub fn info(&self, train: &Corpus) -> BuiltinScorerInfo {
        BuiltinScorerInfo {
            name: self.name.clone(),
            train_split: train.split_name.clone(),
            train_fingerprint: train.fingerprint(),
            features: self.vectorizer.dim(),
            config: self.model.config,
            training: self.model.info.clone(),
        }
    }
}

impl Scorer for BuiltinScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        Ok(texts.iter().map(|t| self.score_text(t)).collect())
    }
}

/// Train the default in-process scorer.
pub fn builtin_scorer(train: &Corpus, config: &LogRegConfig) -> Result<BuiltinScorer, ScorerError> {
    BuiltinScorer::train(train, config)
}
