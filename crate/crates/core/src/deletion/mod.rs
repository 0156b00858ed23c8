//! Token importance by AUC degradation.
//!
//! Iterative deletion scores every vocabulary token by
//! `AUC(f, X ⊕ v) - AUC(f, X)`. Recursive deletion repeatedly removes the
//! token with the largest delta and re-ranks what remains.
//!
//! Only documents containing a candidate token change when it is deleted, so
//! the engine keeps per-document baseline scores and rescores just those
//! documents. AUC is updated from integer pair counts, which makes the
//! selective route produce exactly the same value as rescoring everything.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Vocabulary};
use crate::metrics::{roc_auc_counts, AucCounts, MetricsError, ScoredSet};
use crate::scorer::{validate_scores, Scorer, ScorerError};

mod checkpoint;
mod incremental;
mod io;

pub use checkpoint::{
    checkpoint_read, checkpoint_resume, checkpoint_write, Checkpoint, CheckpointConfig,
    CheckpointError, CheckpointState, Fingerprint, RecursiveStepRecord, RunKind, CHECKPOINT_FORMAT,
    DEFAULT_CHECKPOINT_EVERY,
};
pub use incremental::AucState;
pub use io::{
    read_ranking_csv, read_trace_csv, sidecar_path, write_ranking, write_ranking_csv, write_trace,
    write_trace_csv, RankingIoError,
};

pub const ENGINE_VERSION: &str = concat!("stopgen-deletion/", env!("CARGO_PKG_VERSION"));
pub const TIE_BREAK_RULE: &str = "largest delta_auc first; ties by token ascending (bytewise)";
pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Debug, Error)]
pub enum DeletionError {
    #[error("scorer failed while evaluating {}: {source}", token.as_deref().map(|t| format!("token {t:?}")).unwrap_or_else(|| "the baseline corpus".into()))]
    Scorer {
        token: Option<String>,
        #[source]
        source: ScorerError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("requested {requested} recursive steps but the vocabulary has {available} tokens")]
    TooManySteps { requested: usize, available: usize },
    #[error("scorer is not deterministic: {0}")]
    Nondeterministic(String),
    #[error("interrupted after {completed} completed units of work; progress is checkpointed")]
    Interrupted { completed: usize },
}

/// How candidate deletions are rescored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rescoring {
    /// Rescore only documents containing the candidate token.
    #[default]
    Selective,
    /// Rescore the whole corpus for every candidate.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub batch_size: usize,
    pub workers: usize,
    pub rescoring: Rescoring,
    pub checkpoint: Option<CheckpointConfig>,
    /// Warn when a recursive run is projected to need more document scorings.
    pub scoring_budget: Option<u64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            rescoring: Rescoring::Selective,
            checkpoint: None,
            scoring_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub scorer: String,
    pub corpus_split: String,
    pub corpus_fingerprint: String,
    pub vocabulary_fingerprint: String,
    pub documents: usize,
    pub engine_version: String,
    pub tie_break: String,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub rank: usize,
    pub token: String,
    pub delta_auc: f64,
    pub importance: f64,
}

/// Every vocabulary token ordered least important first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub baseline_auc: f64,
    pub entries: Vec<RankingEntry>,
    pub metadata: RunMetadata,
}

impl ImportanceRanking {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.token.as_str())
    }

    pub fn get(&self, token: &str) -> Option<&RankingEntry> {
        self.entries.iter().find(|e| e.token == token)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub token: String,
    pub delta_auc: f64,
    pub auc_after: f64,
}

/// Stopwords in the order recursive deletion selected them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursiveTrace {
    pub baseline_auc: f64,
    pub steps: Vec<TraceStep>,
    pub metadata: RunMetadata,
}

impl RecursiveTrace {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.token.as_str())
    }
}

/// Negated delta, with zero kept positive.
fn importance_of(delta: f64) -> f64 {
    if delta == 0.0 {
        0.0
    } else {
        -delta
    }
}

/// Token-id view of a corpus with an inverted index.
struct WorkingCorpus {
    names: Vec<String>,
    ids: HashMap<String, u32>,
    docs: Vec<Vec<u32>>,
    labels: Vec<u8>,
    postings: Vec<Vec<u32>>,
}

impl WorkingCorpus {
    fn new(corpus: &Corpus) -> Self {
        let mut names = Vec::new();
        let mut ids: HashMap<String, u32> = HashMap::new();
        let mut postings: Vec<Vec<u32>> = Vec::new();
        let mut docs = Vec::with_capacity(corpus.len());
        for (d, doc) in corpus.documents().iter().enumerate() {
            let mut ids_in_doc = Vec::with_capacity(doc.tokens.len());
            for tok in &doc.tokens {
                let id = *ids.entry(tok.clone()).or_insert_with(|| {
                    names.push(tok.clone());
                    postings.push(Vec::new());
                    (names.len() - 1) as u32
                });
                let list = &mut postings[id as usize];
                if list.last() != Some(&(d as u32)) {
                    list.push(d as u32);
                }
                ids_in_doc.push(id);
            }
            docs.push(ids_in_doc);
        }
        Self {
            names,
            ids,
            docs,
            labels: corpus.labels(),
            postings,
        }
    }

    fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    fn affected(&self, token: &str) -> &[u32] {
        self.id(token).map_or(&[], |id| &self.postings[id as usize])
    }

    fn document_frequency(&self, token: &str) -> u64 {
        self.affected(token).len() as u64
    }

    fn text(&self, doc: usize, without: Option<u32>) -> String {
        let mut out = String::new();
        for &t in &self.docs[doc] {
            if Some(t) == without {
                continue;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&self.names[t as usize]);
        }
        out
    }

    fn delete(&mut self, token: &str) {
        if let Some(id) = self.id(token) {
            for &d in &self.postings[id as usize] {
                self.docs[d as usize].retain(|&t| t != id);
            }
            self.postings[id as usize].clear();
        }
    }
}

fn score_texts(
    scorer: &dyn Scorer,
    texts: &[String],
    batch_size: usize,
) -> Result<Vec<f64>, ScorerError> {
    let mut out = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(batch_size.max(1)) {
        let scores = scorer.score_batch(chunk)?;
        validate_scores(chunk.len(), &scores)?;
        out.extend(scores);
    }
    Ok(out)
}

/// Runs iterative and recursive deletion against one scorer.
pub struct DeletionEngine<'a> {
    scorer: &'a dyn Scorer,
    config: EngineConfig,
    interrupt: Option<Arc<AtomicBool>>,
}

impl<'a> DeletionEngine<'a> {
    pub fn new(scorer: &'a dyn Scorer, config: EngineConfig) -> Self {
        Self {
            scorer,
            config,
            interrupt: None,
        }
    }

    /// Stop at the next checkpoint boundary once `flag` is set.
    pub fn with_interrupt(mut self, flag: Arc<AtomicBool>) -> Self {
        self.interrupt = Some(flag);
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn workers(&self) -> usize {
        if !self.scorer.concurrency_safe() {
            return 1;
        }
        let cap = self.scorer.max_parallelism().unwrap_or(usize::MAX);
        self.config.workers.clamp(1, cap.max(1))
    }

    fn chunk_size(&self) -> usize {
        self.config
            .checkpoint
            .as_ref()
            .map_or(DEFAULT_CHECKPOINT_EVERY, |c| c.every)
            .max(1)
    }

    fn interrupted(&self) -> bool {
        self.interrupt
            .as_ref()
            .is_some_and(|f| f.load(Ordering::SeqCst))
    }

    fn fingerprint(&self, kind: RunKind, corpus: &Corpus, vocab: &Vocabulary) -> Fingerprint {
        Fingerprint {
            kind,
            corpus: corpus.fingerprint(),
            vocabulary: vocab.fingerprint(),
            scorer: self.scorer.name().to_owned(),
            engine_version: ENGINE_VERSION.to_owned(),
        }
    }

    fn metadata(&self, corpus: &Corpus, vocab: &Vocabulary) -> RunMetadata {
        RunMetadata {
            scorer: self.scorer.name().to_owned(),
            corpus_split: corpus.split_name.clone(),
            corpus_fingerprint: corpus.fingerprint(),
            vocabulary_fingerprint: vocab.fingerprint(),
            documents: corpus.len(),
            engine_version: ENGINE_VERSION.to_owned(),
            tie_break: TIE_BREAK_RULE.to_owned(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }

    fn load_checkpoint(
        &self,
        fingerprint: &Fingerprint,
    ) -> Result<Option<Checkpoint>, DeletionError> {
        match &self.config.checkpoint {
            Some(cp) if cp.resume => Ok(checkpoint_resume(&cp.path, fingerprint)?),
            _ => Ok(None),
        }
    }

    fn save_checkpoint(&self, checkpoint: &Checkpoint) -> Result<(), DeletionError> {
        if let Some(cp) = &self.config.checkpoint {
            checkpoint_write(checkpoint, &cp.path)?;
        }
        Ok(())
    }

    fn baseline(&self, work: &WorkingCorpus) -> Result<AucState, DeletionError> {
        let texts: Vec<String> = (0..work.docs.len()).map(|d| work.text(d, None)).collect();
        let scores =
            score_texts(self.scorer, &texts, self.config.batch_size).map_err(|source| {
                DeletionError::Scorer {
                    token: None,
                    source,
                }
            })?;
        Ok(AucState::new(scores, work.labels.clone())?)
    }

    /// Pair counts of the corpus with `token` deleted, plus the rescored
    /// documents and their new scores.
    fn evaluate(
        &self,
        work: &WorkingCorpus,
        state: &AucState,
        token: &str,
    ) -> Result<(AucCounts, Vec<u32>, Vec<f64>), DeletionError> {
        let wrap = |source| DeletionError::Scorer {
            token: Some(token.to_owned()),
            source,
        };
        let id = work.id(token);
        match self.config.rescoring {
            Rescoring::Selective => {
                let docs = work.affected(token).to_vec();
                if docs.is_empty() {
                    return Ok((state.counts(), docs, Vec::new()));
                }
                let texts: Vec<String> = docs.iter().map(|&d| work.text(d as usize, id)).collect();
                let scores =
                    score_texts(self.scorer, &texts, self.config.batch_size).map_err(wrap)?;
                Ok((state.counts_with(&docs, &scores), docs, scores))
            }
            Rescoring::Full => {
                let texts: Vec<String> = (0..work.docs.len()).map(|d| work.text(d, id)).collect();
                let scores =
                    score_texts(self.scorer, &texts, self.config.batch_size).map_err(wrap)?;
                let counts = roc_auc_counts(&ScoredSet::new(&scores, &work.labels)?)?;
                let docs = (0..work.docs.len() as u32).collect();
                Ok((counts, docs, scores))
            }
        }
    }

    /// Evaluate `tokens` concurrently, returning results in input order.
    fn evaluate_many(
        &self,
        pool: &rayon::ThreadPool,
        work: &WorkingCorpus,
        state: &AucState,
        tokens: &[&str],
    ) -> Result<Vec<AucCounts>, DeletionError> {
        let results: Vec<Result<AucCounts, DeletionError>> = pool.install(|| {
            tokens
                .par_iter()
                .map(|t| self.evaluate(work, state, t).map(|(c, _, _)| c))
                .collect()
        });
        results.into_iter().collect()
    }

    fn pool(&self) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers())
            .thread_name(|i| format!("deletion-{i}"))
            .build()
            .expect("build deletion thread pool")
    }

    /// Score every vocabulary token by the AUC change its deletion causes.
    pub fn iterative(
        &self,
        corpus: &Corpus,
        vocab: &Vocabulary,
    ) -> Result<ImportanceRanking, DeletionError> {
        let fingerprint = self.fingerprint(RunKind::Iterative, corpus, vocab);
        let work = WorkingCorpus::new(corpus);
        let state = self.baseline(&work)?;
        let baseline = state.counts();
        let tokens: Vec<&str> = vocab.tokens().collect();

        let mut credits: Vec<u64> = Vec::with_capacity(tokens.len());
        if let Some(cp) = self.load_checkpoint(&fingerprint)? {
            if let CheckpointState::Iterative {
                baseline: saved,
                credits: done,
            } = cp.state
            {
                if saved != baseline {
                    return Err(DeletionError::Nondeterministic(format!(
                        "baseline pair counts {saved:?} in the checkpoint differ from the recomputed {baseline:?}"
                    )));
                }
                if done.len() > tokens.len() {
                    return Err(CheckpointError::Malformed {
                        path: self.config.checkpoint.as_ref().unwrap().path.clone(),
                        message: "more completed tokens than the vocabulary holds".into(),
                    }
                    .into());
                }
                log::info!(
                    "resuming iterative deletion at token {}/{}",
                    done.len(),
                    tokens.len()
                );
                credits = done;
            }
        }

        let pool = self.pool();
        let chunk = self.chunk_size();
        let checkpoint = |credits: &Vec<u64>, complete: bool| Checkpoint {
            format: CHECKPOINT_FORMAT,
            fingerprint: fingerprint.clone(),
            complete,
            state: CheckpointState::Iterative {
                baseline,
                credits: credits.clone(),
            },
        };
        while credits.len() < tokens.len() {
            if self.interrupted() {
                self.save_checkpoint(&checkpoint(&credits, false))?;
                return Err(DeletionError::Interrupted {
                    completed: credits.len(),
                });
            }
            let start = credits.len();
            let end = (start + chunk).min(tokens.len());
            let counts = self.evaluate_many(&pool, &work, &state, &tokens[start..end])?;
            credits.extend(counts.iter().map(|c| c.credit2));
            self.save_checkpoint(&checkpoint(&credits, credits.len() == tokens.len()))?;
            log::debug!(
                "iterative deletion: {}/{} tokens",
                credits.len(),
                tokens.len()
            );
        }
        if tokens.is_empty() {
            self.save_checkpoint(&checkpoint(&credits, true))?;
        }

        let baseline_auc = baseline.auc();
        let mut scored: Vec<(&str, f64)> = tokens
            .iter()
            .zip(&credits)
            .map(|(t, &credit2)| {
                let after = AucCounts {
                    credit2,
                    ..baseline
                }
                .auc();
                (*t, after - baseline_auc)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (token, delta))| RankingEntry {
                rank: i + 1,
                token: token.to_owned(),
                delta_auc: delta,
                importance: importance_of(delta),
            })
            .collect();
        Ok(ImportanceRanking {
            baseline_auc,
            entries,
            metadata: self.metadata(corpus, vocab),
        })
    }

    /// Greedily remove the least important token `k` times.
    pub fn recursive(
        &self,
        corpus: &Corpus,
        vocab: &Vocabulary,
        k: usize,
    ) -> Result<RecursiveTrace, DeletionError> {
        if k > vocab.len() {
            return Err(DeletionError::TooManySteps {
                requested: k,
                available: vocab.len(),
            });
        }
        let fingerprint = self.fingerprint(RunKind::Recursive, corpus, vocab);
        let mut work = WorkingCorpus::new(corpus);
        let mut state = self.baseline(&work)?;
        let initial = state.counts();

        let mut steps: Vec<RecursiveStepRecord> = Vec::new();
        if let Some(cp) = self.load_checkpoint(&fingerprint)? {
            if let CheckpointState::Recursive {
                baseline,
                steps: done,
            } = cp.state
            {
                if baseline != initial {
                    return Err(DeletionError::Nondeterministic(format!(
                        "baseline pair counts {baseline:?} in the checkpoint differ from the recomputed {initial:?}"
                    )));
                }
                log::info!("resuming recursive deletion after step {}", done.len());
                for s in &done {
                    work.delete(&s.token);
                }
                if !done.is_empty() {
                    state = self.baseline(&work)?;
                    let last = done.last().unwrap().counts;
                    if state.counts() != last {
                        return Err(DeletionError::Nondeterministic(format!(
                            "replayed corpus pair counts {:?} differ from the checkpoint's {last:?}",
                            state.counts()
                        )));
                    }
                }
                steps = done;
            }
        }

        let mut remaining: Vec<&str> = vocab
            .tokens()
            .filter(|t| !steps.iter().any(|s| s.token == *t))
            .collect();

        if let Some(budget) = self.config.scoring_budget {
            let per_round: u64 = remaining.iter().map(|t| work.document_frequency(t)).sum();
            let rounds = k.saturating_sub(steps.len()) as u64;
            let projected = per_round.saturating_mul(rounds);
            if projected > budget {
                log::warn!(
                    "recursive deletion projected to need about {projected} document scorings \
                     ({rounds} rounds x {per_round}), above the budget of {budget}"
                );
            }
        }

        let pool = self.pool();
        let chunk = self.chunk_size();
        let save = |steps: &Vec<RecursiveStepRecord>, complete: bool| Checkpoint {
            format: CHECKPOINT_FORMAT,
            fingerprint: fingerprint.clone(),
            complete,
            state: CheckpointState::Recursive {
                baseline: initial,
                steps: steps.clone(),
            },
        };

        while steps.len() < k {
            if self.interrupted() {
                self.save_checkpoint(&save(&steps, false))?;
                return Err(DeletionError::Interrupted {
                    completed: steps.len(),
                });
            }
            let mut round: Vec<AucCounts> = Vec::with_capacity(remaining.len());
            for part in remaining.chunks(chunk) {
                round.extend(self.evaluate_many(&pool, &work, &state, part)?);
            }
            // Largest credit is the largest delta; `remaining` is sorted, so
            // the first maximum is the lexicographically smallest token.
            let mut best = 0;
            for (i, c) in round.iter().enumerate() {
                if c.credit2 > round[best].credit2 {
                    best = i;
                }
            }
            let token = remaining.remove(best);
            let expected = round[best];

            let (_, docs, scores) = self.evaluate(&work, &state, token)?;
            work.delete(token);
            state = if docs.is_empty() {
                state
            } else if self.config.rescoring == Rescoring::Full {
                AucState::new(scores, work.labels.clone())?
            } else {
                let mut all = state.scores().to_vec();
                for (&d, &s) in docs.iter().zip(&scores) {
                    all[d as usize] = s;
                }
                AucState::new(all, work.labels.clone())?
            };
            if state.counts() != expected {
                return Err(DeletionError::Nondeterministic(format!(
                    "rescoring after deleting {token:?} gave pair counts {:?}, expected {expected:?}",
                    state.counts()
                )));
            }
            steps.push(RecursiveStepRecord {
                token: token.to_owned(),
                counts: expected,
            });
            self.save_checkpoint(&save(&steps, steps.len() == k))?;
            log::debug!("recursive deletion step {}/{k}: {token}", steps.len());
        }
        if k == 0 {
            self.save_checkpoint(&save(&steps, true))?;
        }

        let mut prev = initial.auc();
        let trace = steps
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, s)| {
                let after = s.counts.auc();
                let step = TraceStep {
                    step: i + 1,
                    token: s.token.clone(),
                    delta_auc: after - prev,
                    auc_after: after,
                };
                prev = after;
                step
            })
            .collect();
        Ok(RecursiveTrace {
            baseline_auc: initial.auc(),
            steps: trace,
            metadata: self.metadata(corpus, vocab),
        })
    }
}

/// Iterative deletion with the given engine settings.
pub fn iterative_deletion(
    scorer: &dyn Scorer,
    corpus: &Corpus,
    vocab: &Vocabulary,
    config: &EngineConfig,
) -> Result<ImportanceRanking, DeletionError> {
    DeletionEngine::new(scorer, config.clone()).iterative(corpus, vocab)
}

/// Recursive deletion of `k` tokens with the given engine settings.
pub fn recursive_deletion(
    scorer: &dyn Scorer,
    corpus: &Corpus,
    vocab: &Vocabulary,
    k: usize,
    config: &EngineConfig,
) -> Result<RecursiveTrace, DeletionError> {
    DeletionEngine::new(scorer, config.clone()).recursive(corpus, vocab, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocabulary;

    /// 0.9 with "good", 0.1 with "bad", 0.5 otherwise.
    struct Stub;

    impl Scorer for Stub {
        fn name(&self) -> &str {
            "stub"
        }
        fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
            Ok(texts
                .iter()
                .map(|t| {
                    let toks: Vec<&str> = t.split(' ').collect();
                    if toks.contains(&"good") {
                        0.9
                    } else if toks.contains(&"bad") {
                        0.1
                    } else {
                        0.5
                    }
                })
                .collect())
        }
    }

    fn stub_corpus() -> Corpus {
        Corpus::from_texts(
            "stub",
            [
                ("good fun", 1u8),
                ("meh slow", 0),
                ("good nice", 1),
                ("bad dull", 0),
            ],
        )
    }

    fn config(workers: usize) -> EngineConfig {
        EngineConfig {
            workers,
            ..EngineConfig::default()
        }
    }

    #[test]
    fn stub_iterative_example() {
        let corpus = stub_corpus();
        let vocab = build_vocabulary(&corpus);
        let r = iterative_deletion(&Stub, &corpus, &vocab, &config(1)).unwrap();
        assert_eq!(r.baseline_auc, 1.0);
        let good = r.get("good").unwrap();
        assert_eq!(good.delta_auc, -0.25);
        assert_eq!(good.importance, 0.25);
        let fun = r.get("fun").unwrap();
        assert_eq!(fun.delta_auc, 0.0);
        assert_eq!(fun.importance, 0.0);
        let order: Vec<&str> = r.tokens().collect();
        assert_eq!(
            order,
            vec!["bad", "dull", "fun", "meh", "nice", "slow", "good"]
        );
        let ranks: Vec<usize> = r.entries.iter().map(|e| e.rank).collect();
        assert_eq!(ranks, (1..=7).collect::<Vec<_>>());
    }

    #[test]
    fn stub_recursive_first_step() {
        let corpus = stub_corpus();
        let vocab = build_vocabulary(&corpus);
        let t = recursive_deletion(&Stub, &corpus, &vocab, 1, &config(1)).unwrap();
        // "bad" deletion moves a negative from 0.1 to 0.5, still below the
        // positives, so it also ties at delta 0 and wins lexicographically.
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.steps[0].token, "bad");
        assert_eq!(t.steps[0].delta_auc, 0.0);
    }

    #[test]
    fn recursive_exhausts_vocabulary() {
        let corpus = stub_corpus();
        let vocab = build_vocabulary(&corpus);
        let t = recursive_deletion(&Stub, &corpus, &vocab, vocab.len(), &config(2)).unwrap();
        let mut got: Vec<&str> = t.tokens().collect();
        got.sort_unstable();
        assert_eq!(got, vocab.tokens().collect::<Vec<_>>());
        assert!(matches!(
            recursive_deletion(&Stub, &corpus, &vocab, vocab.len() + 1, &config(1)),
            Err(DeletionError::TooManySteps { .. })
        ));
    }

    #[test]
    fn absent_token_has_zero_delta() {
        let corpus = stub_corpus();
        let vocab = Vocabulary::from_tokens(["zebra"]);
        let r = iterative_deletion(&Stub, &corpus, &vocab, &config(1)).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].rank, 1);
        assert_eq!(r.entries[0].delta_auc, 0.0);
    }

    #[test]
    fn single_class_corpus_fails() {
        let corpus = Corpus::from_texts("x", [("good", 1u8), ("bad", 1)]);
        let vocab = build_vocabulary(&corpus);
        assert!(matches!(
            iterative_deletion(&Stub, &corpus, &vocab, &config(1)),
            Err(DeletionError::Metrics(MetricsError::SingleClass))
        ));
    }

    #[test]
    fn full_and_selective_agree_on_stub() {
        let corpus = stub_corpus();
        let vocab = build_vocabulary(&corpus);
        let sel = iterative_deletion(&Stub, &corpus, &vocab, &config(1)).unwrap();
        let full = iterative_deletion(
            &Stub,
            &corpus,
            &vocab,
            &EngineConfig {
                rescoring: Rescoring::Full,
                ..config(3)
            },
        )
        .unwrap();
        assert_eq!(sel.entries, full.entries);
    }

    struct Failing;

    impl Scorer for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
            if texts.iter().any(|t| t.is_empty()) {
                Err(ScorerError::WrongLength {
                    expected: 1,
                    found: 0,
                })
            } else {
                Ok(vec![0.5; texts.len()])
            }
        }
    }

    #[test]
    fn scorer_failure_names_token() {
        let corpus = Corpus::from_texts("x", [("solo", 1u8), ("a b", 0)]);
        let vocab = build_vocabulary(&corpus);
        let err = iterative_deletion(&Failing, &corpus, &vocab, &config(1)).unwrap_err();
        assert!(err.to_string().contains("\"solo\""), "{err}");
    }
}
