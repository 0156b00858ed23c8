//! Task-specific stopword generation.
//!
//! Tokens are ranked by how much a probabilistic classifier's ROC-AUC
//! degrades when they are deleted from a corpus, either one at a time
//! ([`deletion::iterative_deletion`]) or greedily with re-ranking after every
//! removal ([`deletion::recursive_deletion`]). The least important tokens
//! form stopword lists, which [`eval`] validates by retraining a TF-IDF +
//! logistic regression classifier on the reduced corpus.

pub mod cli;
pub mod corpus;
pub mod deletion;
pub mod eval;
pub mod metrics;
pub mod scorer;
pub mod stopwords;

pub use corpus::{
    build_vocabulary, load_corpus, tokenize, Corpus, Document, LoadOptions, Vocabulary,
};
pub use deletion::{
    iterative_deletion, recursive_deletion, EngineConfig, ImportanceRanking, RecursiveTrace,
};
pub use eval::{evaluate_stopword_set, reduction, EvalConfig, EvalReport, ReductionReport};
pub use scorer::{
    builtin_scorer, external::spawn_external_scorer, BuiltinScorer, ExternalScorer, Scorer,
};
pub use stopwords::{from_ranking, load_list, merge, save_list, StopwordList};
