use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::{ImportanceRanking, RankingEntry, RecursiveTrace, RunMetadata, TraceStep};

pub const RANKING_HEADER: [&str; 4] = ["rank", "token", "delta_auc", "importance"];
pub const TRACE_HEADER: [&str; 4] = ["step", "token", "delta_auc", "auc_after"];

#[derive(Debug, Error)]
pub enum RankingIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// `ranking.csv` -> `ranking.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

#[derive(Serialize)]
struct RankingSidecar<'a> {
    baseline_auc: f64,
    entries: usize,
    #[serde(flatten)]
    metadata: &'a RunMetadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    run_config: Option<&'a serde_json::Value>,
}

fn write_csv<W: Write>(
    out: W,
    header: [&str; 4],
    rows: impl Iterator<Item = [String; 4]>,
) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Ranking rows only; floats use the shortest round-trip representation.
pub fn write_ranking_csv<W: Write>(ranking: &ImportanceRanking, out: W) -> Result<(), csv::Error> {
    write_csv(
        out,
        RANKING_HEADER,
        ranking.entries.iter().map(|e| {
            [
                e.rank.to_string(),
                e.token.clone(),
                e.delta_auc.to_string(),
                e.importance.to_string(),
            ]
        }),
    )
}

pub fn write_trace_csv<W: Write>(trace: &RecursiveTrace, out: W) -> Result<(), csv::Error> {
    write_csv(
        out,
        TRACE_HEADER,
        trace.steps.iter().map(|s| {
            [
                s.step.to_string(),
                s.token.clone(),
                s.delta_auc.to_string(),
                s.auc_after.to_string(),
            ]
        }),
    )
}

fn write_file(
    path: &Path,
    body: impl FnOnce(BufWriter<File>) -> Result<(), csv::Error>,
    sidecar: &impl Serialize,
) -> Result<(), RankingIoError> {
    let io_err = |source| RankingIoError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    body(BufWriter::new(file)).map_err(|source| RankingIoError::Csv {
        path: path.to_owned(),
        source,
    })?;
    let meta = sidecar_path(path);
    let mut json = serde_json::to_vec_pretty(sidecar).expect("metadata serializes");
    json.push(b'\n');
    fs::write(&meta, json).map_err(|source| RankingIoError::Io { path: meta, source })
}

/// Write the ranking CSV and its `.meta.json` sidecar.
pub fn write_ranking(
    ranking: &ImportanceRanking,
    path: &Path,
    run_config: Option<&serde_json::Value>,
) -> Result<(), RankingIoError> {
    let sidecar = RankingSidecar {
        baseline_auc: ranking.baseline_auc,
        entries: ranking.entries.len(),
        metadata: &ranking.metadata,
        run_config,
    };
    write_file(path, |w| write_ranking_csv(ranking, w), &sidecar)
}

pub fn write_trace(
    trace: &RecursiveTrace,
    path: &Path,
    run_config: Option<&serde_json::Value>,
) -> Result<(), RankingIoError> {
    let sidecar = RankingSidecar {
        baseline_auc: trace.baseline_auc,
        entries: trace.steps.len(),
        metadata: &trace.metadata,
        run_config,
    };
    write_file(path, |w| write_trace_csv(trace, w), &sidecar)
}

fn read_rows(path: &Path, header: [&str; 4]) -> Result<Vec<csv::StringRecord>, RankingIoError> {
    let csv_err = |source| RankingIoError::Csv {
        path: path.to_owned(),
        source,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let found = rdr.headers().map_err(csv_err)?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(RankingIoError::Format {
            path: path.to_owned(),
            message: format!(
                "expected header {:?}, found {:?}",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    rdr.records().map(|r| r.map_err(csv_err)).collect()
}

fn parse<T: std::str::FromStr>(
    path: &Path,
    row: usize,
    field: &str,
    raw: &str,
) -> Result<T, RankingIoError> {
    raw.parse().map_err(|_| RankingIoError::Format {
        path: path.to_owned(),
        message: format!("row {row}: cannot parse {field} from {raw:?}"),
    })
}

fn read_sidecar(path: &Path) -> (Option<f64>, RunMetadata) {
    let value: Option<serde_json::Value> = fs::read(sidecar_path(path))
        .ok()
        .and_then(|b| serde_json::from_slice(&b).ok());
    let baseline = value
        .as_ref()
        .and_then(|v| v.get("baseline_auc"))
        .and_then(|v| v.as_f64());
    let metadata = value
        .and_then(|v| serde_json::from_value(v).ok())
        .unwrap_or_else(|| RunMetadata {
            scorer: "unknown".into(),
            corpus_split: "unknown".into(),
            corpus_fingerprint: String::new(),
            vocabulary_fingerprint: String::new(),
            documents: 0,
            engine_version: String::new(),
            tie_break: super::TIE_BREAK_RULE.into(),
            timestamp: String::new(),
        });
    (baseline, metadata)
}

/// Read a ranking CSV, taking metadata from its sidecar when present.
pub fn read_ranking_csv(path: &Path) -> Result<ImportanceRanking, RankingIoError> {
    let rows = read_rows(path, RANKING_HEADER)?;
    let mut entries = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let row = i + 2;
        entries.push(RankingEntry {
            rank: parse(path, row, "rank", &r[0])?,
            token: r[1].to_owned(),
            delta_auc: parse(path, row, "delta_auc", &r[2])?,
            importance: parse(path, row, "importance", &r[3])?,
        });
    }
    if entries.iter().enumerate().any(|(i, e)| e.rank != i + 1) {
        return Err(RankingIoError::Format {
            path: path.to_owned(),
            message: "ranks must run 1..n in file order".into(),
        });
    }
    let (baseline, metadata) = read_sidecar(path);
    Ok(ImportanceRanking {
        baseline_auc: baseline.unwrap_or(f64::NAN),
        entries,
        metadata,
    })
}

pub fn read_trace_csv(path: &Path) -> Result<RecursiveTrace, RankingIoError> {
    let rows = read_rows(path, TRACE_HEADER)?;
    let mut steps = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let row = i + 2;
        steps.push(TraceStep {
            step: parse(path, row, "step", &r[0])?,
            token: r[1].to_owned(),
            delta_auc: parse(path, row, "delta_auc", &r[2])?,
            auc_after: parse(path, row, "auc_after", &r[3])?,
        });
    }
    let (baseline, metadata) = read_sidecar(path);
    Ok(RecursiveTrace {
        baseline_auc: baseline.unwrap_or(f64::NAN),
        steps,
        metadata,
    })
}
