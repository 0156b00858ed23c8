//! Stopword lists: construction from rankings, merging, and file I/O.
//!
//! List files hold one token per line. `#` starts a comment and blank lines
//! are ignored. Provenance lives in a `.meta.json` sidecar next to the list.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::is_punctuation;
use crate::deletion::{ImportanceRanking, RecursiveTrace};

/// The conventional 318-token English list shipped with common ML tooling.
pub const ENGLISH_BASELINE: &str = include_str!("../data/english_baseline.txt");
pub const ENGLISH_BASELINE_NAME: &str = "english-baseline";

#[derive(Debug, Error)]
pub enum StopwordError {
    #[error("requested {requested} stopwords but the source has only {available} tokens")]
    TooLarge { requested: usize, available: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: invalid provenance sidecar: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error("invalid stopword {token:?}: {message}")]
    InvalidToken { token: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Iterative,
    Recursive,
    Baseline,
    Merged,
    /// Loaded from a plain list file with no provenance sidecar.
    File,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Iterative => "iterative",
            Method::Recursive => "recursive",
            Method::Baseline => "baseline",
            Method::Merged => "merged",
            Method::File => "file",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: Method,
    /// Fingerprints (or names) of the rankings and lists this list came from.
    pub sources: Vec<String>,
    pub requested_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopwordList {
    pub name: String,
    tokens: Vec<String>,
    pub provenance: Provenance,
}

fn check_token(token: &str) -> Result<(), String> {
    if token.is_empty() {
        return Err("empty token".into());
    }
    if token.chars().any(char::is_whitespace) {
        return Err("token contains whitespace".into());
    }
    if token.chars().any(is_punctuation) {
        return Err("token contains punctuation".into());
    }
    if token.to_lowercase() != token {
        return Err("token is not lowercase".into());
    }
    Ok(())
}

fn fingerprint_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> String {
    let mut hasher = Sha256::new();
    for t in tokens {
        hasher.update(t.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

impl StopwordList {
    /// Build a list, rejecting duplicates and malformed tokens.
    pub fn new(
        name: impl Into<String>,
        tokens: Vec<String>,
        provenance: Provenance,
    ) -> Result<Self, StopwordError> {
        let mut seen = HashSet::new();
        for t in &tokens {
            check_token(t).map_err(|message| StopwordError::InvalidToken {
                token: t.clone(),
                message,
            })?;
            if !seen.insert(t.as_str()) {
                return Err(StopwordError::InvalidToken {
                    token: t.clone(),
                    message: "duplicate token".into(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            tokens,
            provenance,
        })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            tokens: Vec::new(),
            provenance: Provenance {
                method: Method::File,
                sources: Vec::new(),
                requested_size: Some(0),
            },
        }
    }

    /// The bundled English baseline list.
    pub fn english_baseline() -> Self {
        let tokens: Vec<String> = ENGLISH_BASELINE.lines().map(str::to_owned).collect();
        let fp = fingerprint_tokens(tokens.iter().map(String::as_str));
        Self {
            name: ENGLISH_BASELINE_NAME.into(),
            provenance: Provenance {
                method: Method::Baseline,
                sources: vec![format!("{ENGLISH_BASELINE_NAME}:{fp}")],
                requested_size: None,
            },
            tokens,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.iter().any(|t| t == token)
    }

    pub fn fingerprint(&self) -> String {
        fingerprint_tokens(self.tokens.iter().map(String::as_str))
    }
}

/// Something that orders tokens least important first.
pub trait RankedTokens {
    fn ordered_tokens(&self) -> Vec<&str>;
    fn method(&self) -> Method;
    fn source_id(&self) -> String;
}

impl RankedTokens for ImportanceRanking {
    fn ordered_tokens(&self) -> Vec<&str> {
        self.tokens().collect()
    }
    fn method(&self) -> Method {
        Method::Iterative
    }
    fn source_id(&self) -> String {
        format!(
            "iterative:{}:{}",
            self.metadata.scorer,
            fingerprint_tokens(self.tokens())
        )
    }
}

impl RankedTokens for RecursiveTrace {
    fn ordered_tokens(&self) -> Vec<&str> {
        self.tokens().collect()
    }
    fn method(&self) -> Method {
        Method::Recursive
    }
    fn source_id(&self) -> String {
        format!(
            "recursive:{}:{}",
            self.metadata.scorer,
            fingerprint_tokens(self.tokens())
        )
    }
}

/// The `n` least important tokens of a ranking or trace.
pub fn from_ranking<R: RankedTokens + ?Sized>(
    ranking: &R,
    n: usize,
) -> Result<StopwordList, StopwordError> {
    let ordered = ranking.ordered_tokens();
    if n > ordered.len() {
        return Err(StopwordError::TooLarge {
            requested: n,
            available: ordered.len(),
        });
    }
    let method = ranking.method();
    StopwordList::new(
        format!("{method}-{n}"),
        ordered[..n].iter().map(|t| (*t).to_owned()).collect(),
        Provenance {
            method,
            sources: vec![ranking.source_id()],
            requested_size: Some(n),
        },
    )
}

/// Concatenate in order, keeping the first occurrence of each token.
pub fn merge(lists: &[StopwordList]) -> StopwordList {
    let mut seen = HashSet::new();
    let mut tokens = Vec::new();
    let mut sources = Vec::new();
    for list in lists {
        for t in &list.tokens {
            if seen.insert(t.as_str()) {
                tokens.push(t.clone());
            }
        }
        for s in &list.provenance.sources {
            if !sources.contains(s) {
                sources.push(s.clone());
            }
        }
    }
    let name = lists
        .iter()
        .map(|l| l.name.as_str())
        .collect::<Vec<_>>()
        .join("+");
    StopwordList {
        name,
        tokens,
        provenance: Provenance {
            method: Method::Merged,
            sources,
            requested_size: None,
        },
    }
}

pub fn list_sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

#[derive(Serialize, Deserialize)]
struct ListSidecar {
    name: String,
    tokens: usize,
    fingerprint: String,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    run_config: Option<serde_json::Value>,
}

/// Write the list (LF line endings, UTF-8, no BOM) and its sidecar.
pub fn save_list(list: &StopwordList, path: &Path) -> Result<(), StopwordError> {
    save_list_with_config(list, path, None)
}

/// [`save_list`], also recording the configuration that produced the list.
pub fn save_list_with_config(
    list: &StopwordList,
    path: &Path,
    run_config: Option<&serde_json::Value>,
) -> Result<(), StopwordError> {
    let io_err = |path: &Path| {
        let path = path.to_owned();
        move |source| StopwordError::Io { path, source }
    };
    let mut body = String::with_capacity(list.tokens.iter().map(|t| t.len() + 1).sum());
    for t in &list.tokens {
        body.push_str(t);
        body.push('\n');
    }
    fs::write(path, body).map_err(io_err(path))?;
    let sidecar = ListSidecar {
        name: list.name.clone(),
        tokens: list.tokens.len(),
        fingerprint: list.fingerprint(),
        provenance: list.provenance.clone(),
        run_config: run_config.cloned(),
    };
    let meta = list_sidecar_path(path);
    let mut json = serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes");
    json.push(b'\n');
    fs::write(&meta, json).map_err(io_err(&meta))
}

/// Parse list file contents.
pub fn parse_list(text: &str, path: &Path) -> Result<Vec<String>, StopwordError> {
    let mut tokens = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| StopwordError::Parse {
            path: path.to_owned(),
            line: i + 1,
            message,
        };
        check_token(line).map_err(|m| parse_err(format!("{m}: {line:?}")))?;
        if seen.insert(line.to_owned()) {
            tokens.push(line.to_owned());
        }
    }
    Ok(tokens)
}

/// Load a list file; provenance comes from its sidecar when one exists.
pub fn load_list(path: &Path) -> Result<StopwordList, StopwordError> {
    let text = fs::read_to_string(path).map_err(|source| StopwordError::Io {
        path: path.to_owned(),
        source,
    })?;
    let tokens = parse_list(text.trim_start_matches('\u{feff}'), path)?;
    let meta = list_sidecar_path(path);
    let (name, provenance) = match fs::read(&meta) {
        Ok(bytes) => {
            let sidecar: ListSidecar =
                serde_json::from_slice(&bytes).map_err(|e| StopwordError::Sidecar {
                    path: meta.clone(),
                    message: e.to_string(),
                })?;
            (sidecar.name, sidecar.provenance)
        }
        Err(_) => (
            path.file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("list")
                .to_owned(),
            Provenance {
                method: Method::File,
                sources: vec![format!(
                    "file:{}",
                    fingerprint_tokens(tokens.iter().map(String::as_str))
                )],
                requested_size: None,
            },
        ),
    };
    Ok(StopwordList {
        name,
        tokens,
        provenance,
    })
}
