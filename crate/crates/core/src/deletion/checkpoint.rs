//! Resumable engine state.
//!
//! Checkpoints store AUC pair counts rather than floats, so a resumed run
//! reproduces the uninterrupted result bit for bit.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::AucCounts;

pub const CHECKPOINT_FORMAT: u32 = 1;
pub const DEFAULT_CHECKPOINT_EVERY: usize = 100;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint {path} is not valid: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("checkpoint {path} was written for a different run: {}", .mismatches.join("; "))]
    FingerprintMismatch {
        path: PathBuf,
        mismatches: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Iterative,
    Recursive,
}

/// Identity of a run; a checkpoint is only resumed against an equal one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub kind: RunKind,
    pub corpus: String,
    pub vocabulary: String,
    pub scorer: String,
    pub engine_version: String,
}

impl Fingerprint {
    fn mismatches(&self, other: &Fingerprint) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |field: &str, a: &str, b: &str| {
            if a != b {
                out.push(format!("{field} differs (checkpoint {b}, current {a})"));
            }
        };
        check(
            "run kind",
            &format!("{:?}", self.kind),
            &format!("{:?}", other.kind),
        );
        check("corpus", &self.corpus, &other.corpus);
        check("vocabulary", &self.vocabulary, &other.vocabulary);
        check("scorer", &self.scorer, &other.scorer);
        check(
            "engine version",
            &self.engine_version,
            &other.engine_version,
        );
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecursiveStepRecord {
    pub token: String,
    /// Pair counts of the corpus after this step's deletion.
    pub counts: AucCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CheckpointState {
    Iterative {
        baseline: AucCounts,
        /// Pair credits for the leading vocabulary tokens, in vocabulary order.
        credits: Vec<u64>,
    },
    Recursive {
        baseline: AucCounts,
        steps: Vec<RecursiveStepRecord>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub fingerprint: Fingerprint,
    pub complete: bool,
    pub state: CheckpointState,
}

/// Where and how often the engine persists progress.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub path: PathBuf,
    /// Iterative runs persist after every this many tokens.
    pub every: usize,
    /// Continue from an existing checkpoint at `path` if present.
    pub resume: bool,
}

impl CheckpointConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            every: DEFAULT_CHECKPOINT_EVERY,
            resume: false,
        }
    }
}

/// Atomically replace `path` with `checkpoint`.
pub fn checkpoint_write(checkpoint: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    let io_err = |source| CheckpointError::Io {
        path: path.to_owned(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    serde_json::to_writer(&mut tmp, checkpoint).map_err(|e| io_err(e.into()))?;
    tmp.write_all(b"\n").map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Load a checkpoint; `Ok(None)` when the file does not exist.
pub fn checkpoint_read(path: &Path) -> Result<Option<Checkpoint>, CheckpointError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(source) => {
            return Err(CheckpointError::Io {
                path: path.to_owned(),
                source,
            })
        }
    };
    let cp: Checkpoint =
        serde_json::from_slice(&bytes).map_err(|e| CheckpointError::Malformed {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
    if cp.format != CHECKPOINT_FORMAT {
        return Err(CheckpointError::Malformed {
            path: path.to_owned(),
            message: format!(
                "format {} is not supported (expected {CHECKPOINT_FORMAT})",
                cp.format
            ),
        });
    }
    Ok(Some(cp))
}

/// Load a checkpoint and check that it belongs to the run `expected`.
pub fn checkpoint_resume(
    path: &Path,
    expected: &Fingerprint,
) -> Result<Option<Checkpoint>, CheckpointError> {
    let Some(cp) = checkpoint_read(path)? else {
        return Ok(None);
    };
    let mismatches = expected.mismatches(&cp.fingerprint);
    if !mismatches.is_empty() {
        return Err(CheckpointError::FingerprintMismatch {
            path: path.to_owned(),
            mismatches,
        });
    }
    let kind_ok = matches!(
        (&cp.state, expected.kind),
        (CheckpointState::Iterative { .. }, RunKind::Iterative)
            | (CheckpointState::Recursive { .. }, RunKind::Recursive)
    );
    if !kind_ok {
        return Err(CheckpointError::Malformed {
            path: path.to_owned(),
            message: "state does not match the run kind".into(),
        });
    }
    Ok(Some(cp))
}
