//! Corpus ingestion, tokenization, vocabulary construction and the token
//! deletion operator.
//!
//! Deletion works on token sequences, never on raw strings. The text a
//! scorer sees for a document is its remaining tokens joined by single
//! spaces, so deleting a token is exact and order independent.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// The 32 ASCII punctuation symbols removed by [`tokenize`].
pub const PUNCTUATION: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

#[inline]
pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
}

/// Lowercase, delete ASCII punctuation, split on whitespace runs.
///
/// Punctuation is deleted rather than replaced with a space, so `n't`
/// becomes `nt` and `-lrb-` becomes `lrb`.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| !is_punctuation(*c))
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot open corpus file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: missing header row")]
    MissingHeader { path: PathBuf },
    #[error("{path}: header has no column named {column:?}")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}: {message}")]
    BadRow {
        path: PathBuf,
        row: u64,
        message: String,
    },
    #[error("{path}: row {row}: label {label:?} is not 0 or 1")]
    BadLabel {
        path: PathBuf,
        row: u64,
        label: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Tsv,
    Csv,
}

impl CorpusFormat {
    pub fn delimiter(self) -> u8 {
        match self {
            CorpusFormat::Tsv => b'\t',
            CorpusFormat::Csv => b',',
        }
    }

    /// Guess from a file extension, defaulting to TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Tsv,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(CorpusFormat::Tsv),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(format!(
                "unknown corpus format {other:?} (expected tsv or csv)"
            )),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Tsv => "tsv",
            CorpusFormat::Csv => "csv",
        })
    }
}

/// How to read a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub format: CorpusFormat,
    pub text_column: String,
    pub label_column: String,
}

impl LoadOptions {
    pub fn new(format: CorpusFormat) -> Self {
        Self {
            format,
            text_column: "sentence".to_owned(),
            label_column: "label".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: usize,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub label: u8,
}

impl Document {
    /// Build a document from raw text; panics if `label` is not 0 or 1.
    pub fn new(id: usize, raw_text: impl Into<String>, label: u8) -> Self {
        assert!(label <= 1, "label must be 0 or 1, got {label}");
        let raw_text = raw_text.into();
        let tokens = tokenize(&raw_text);
        Self {
            id,
            raw_text,
            tokens,
            label,
        }
    }

    /// The text handed to a scorer: remaining tokens joined by single spaces.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Character count of [`Document::text`] without allocating it.
    pub fn char_len(&self) -> usize {
        if self.tokens.is_empty() {
            return 0;
        }
        self.tokens.iter().map(|t| t.chars().count()).sum::<usize>() + self.tokens.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub split_name: String,
    documents: Vec<Document>,
}

impl Corpus {
    /// Assemble a corpus from `(text, label)` pairs, assigning ids in order.
    pub fn from_texts<I, S>(split_name: impl Into<String>, rows: I) -> Self
    where
        I: IntoIterator<Item = (S, u8)>,
        S: Into<String>,
    {
        let documents = rows
            .into_iter()
            .enumerate()
            .map(|(id, (text, label))| Document::new(id, text, label))
            .collect();
        Self {
            split_name: split_name.into(),
            documents,
        }
    }

    /// Assemble a corpus directly from token sequences. Tokens are
    /// normalized through [`tokenize`] so the document invariants hold.
    pub fn from_tokens<I>(split_name: impl Into<String>, rows: I) -> Self
    where
        I: IntoIterator<Item = (Vec<String>, u8)>,
    {
        Self::from_texts(
            split_name,
            rows.into_iter()
                .map(|(tokens, label)| (tokens.join(" "), label)),
        )
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.documents.iter().map(|d| d.label).collect()
    }

    pub fn texts(&self) -> Vec<String> {
        self.documents.iter().map(Document::text).collect()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }

    pub fn char_count(&self) -> usize {
        self.documents.iter().map(Document::char_len).sum()
    }

    /// Number of positive and negative documents.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.documents.iter().filter(|d| d.label == 1).count();
        (pos, self.documents.len() - pos)
    }

    pub fn has_both_classes(&self) -> bool {
        let (pos, neg) = self.class_counts();
        pos > 0 && neg > 0
    }

    /// SHA-256 over labels and token sequences. Raw text is excluded, so two
    /// corpora that tokenize identically share a fingerprint.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for doc in &self.documents {
            hasher.update([doc.label]);
            hasher.update((doc.tokens.len() as u64).to_le_bytes());
            for tok in &doc.tokens {
                hasher.update((tok.len() as u64).to_le_bytes());
                hasher.update(tok.as_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    /// Remove every occurrence of `token` (the deletion operator).
    pub fn delete_token(&self, token: &str) -> Corpus {
        self.retain_tokens(|t| t != token)
    }

    /// Remove every occurrence of any token in `tokens`.
    pub fn delete_tokens<'a, I>(&self, tokens: I) -> Corpus
    where
        I: IntoIterator<Item = &'a str>,
    {
        let set: HashSet<&str> = tokens.into_iter().collect();
        if set.is_empty() {
            return self.clone();
        }
        self.retain_tokens(|t| !set.contains(t))
    }

    fn retain_tokens(&self, keep: impl Fn(&str) -> bool) -> Corpus {
        let documents = self
            .documents
            .iter()
            .map(|doc| Document {
                id: doc.id,
                raw_text: doc.raw_text.clone(),
                tokens: doc.tokens.iter().filter(|t| keep(t)).cloned().collect(),
                label: doc.label,
            })
            .collect();
        Corpus {
            split_name: self.split_name.clone(),
            documents,
        }
    }
}

/// Read a labeled corpus file with a header row.
pub fn load_corpus(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let split_name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_owned();
    read_corpus(file, path, split_name, options)
}

pub(crate) fn read_corpus<R: Read>(
    reader: R,
    path: &Path,
    split_name: String,
    options: &LoadOptions,
) -> Result<Corpus, CorpusError> {
    let mut builder = csv::ReaderBuilder::new();
    builder
        .delimiter(options.format.delimiter())
        .has_headers(true);
    // SST-style TSV files carry bare double quotes inside sentences.
    if options.format == CorpusFormat::Tsv {
        builder.quoting(false);
    }
    let mut rdr = builder.from_reader(reader);

    let headers = match rdr.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].is_empty()) => h.clone(),
        Ok(_) => {
            return Err(CorpusError::MissingHeader {
                path: path.to_owned(),
            })
        }
        Err(e) => return Err(csv_error(path, e)),
    };
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CorpusError::MissingColumn {
                path: path.to_owned(),
                column: name.to_owned(),
            })
    };
    let text_idx = column(&options.text_column)?;
    let label_idx = column(&options.label_column)?;

    let mut documents = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize| {
            record.get(idx).ok_or_else(|| CorpusError::BadRow {
                path: path.to_owned(),
                row,
                message: format!(
                    "expected at least {} fields, found {}",
                    idx + 1,
                    record.len()
                ),
            })
        };
        let text = field(text_idx)?;
        let raw_label = field(label_idx)?;
        let label = match raw_label.trim() {
            "0" => 0,
            "1" => 1,
            _ => {
                return Err(CorpusError::BadLabel {
                    path: path.to_owned(),
                    row,
                    label: raw_label.to_owned(),
                })
            }
        };
        documents.push(Document::new(documents.len(), text, label));
    }
    Ok(Corpus {
        split_name,
        documents,
    })
}

fn csv_error(path: &Path, err: csv::Error) -> CorpusError {
    let row = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => CorpusError::Io {
            path: path.to_owned(),
            source,
        },
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => CorpusError::BadRow {
            path: path.to_owned(),
            row,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        csv::ErrorKind::Utf8 { err, .. } => CorpusError::BadRow {
            path: path.to_owned(),
            row,
            message: format!("invalid UTF-8: {err}"),
        },
        other => CorpusError::BadRow {
            path: path.to_owned(),
            row,
            message: format!("{other:?}"),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub token: String,
    pub term_frequency: u64,
    pub document_frequency: u64,
}

/// Distinct corpus tokens in lexicographic order with tf/df counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
}

impl Vocabulary {
    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.token.as_str())
    }

    pub fn get(&self, token: &str) -> Option<&VocabEntry> {
        self.entries
            .binary_search_by(|e| e.token.as_str().cmp(token))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.get(token).is_some()
    }

    /// Build a ranking universe from an explicit token list. Counts are
    /// zero for these entries; duplicates are dropped.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map: BTreeMap<String, ()> = BTreeMap::new();
        for t in tokens {
            map.insert(t.into(), ());
        }
        Self {
            entries: map
                .into_keys()
                .map(|token| VocabEntry {
                    token,
                    term_frequency: 0,
                    document_frequency: 0,
                })
                .collect(),
        }
    }

    /// Keep only the entries accepted by `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&VocabEntry) -> bool) -> Vocabulary {
        Vocabulary {
            entries: self.entries.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    pub fn total_term_frequency(&self) -> u64 {
        self.entries.iter().map(|e| e.term_frequency).sum()
    }

    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for e in &self.entries {
            hasher.update((e.token.len() as u64).to_le_bytes());
            hasher.update(e.token.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

pub fn build_vocabulary(corpus: &Corpus) -> Vocabulary {
    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for doc in corpus.documents() {
        seen.clear();
        for tok in &doc.tokens {
            let entry = counts.entry(tok.as_str()).or_insert((0, 0));
            entry.0 += 1;
            if seen.insert(tok.as_str()) {
                entry.1 += 1;
            }
        }
    }
    Vocabulary {
        entries: counts
            .into_iter()
            .map(|(token, (tf, df))| VocabEntry {
                token: token.to_owned(),
                term_frequency: tf,
                document_frequency: df,
            })
            .collect(),
    }
}
