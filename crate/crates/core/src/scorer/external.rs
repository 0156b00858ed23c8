//! Client for scorers running as child processes.
//!
//! Protocol, one JSON object per line over the child's stdin/stdout:
//!
//! ```text
//! child  -> {"type":"ready","protocol":1,"name":"<adapter name>"}
//! engine -> {"id":7,"texts":["a great movie","a terrible movie"]}
//! child  -> {"id":7,"scores":[0.98,0.02]}      or {"id":7,"error":"..."}
//! ```
//!
//! The engine closes stdin to shut a child down. Any stdout line that is not
//! a protocol message is a violation; adapters log to stderr.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Scorer, ScorerError};

pub const PROTOCOL_VERSION: u64 = 1;
pub const DEFAULT_READY_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalScorerConfig {
    pub command: Vec<String>,
    pub pool_size: usize,
    #[serde(with = "secs")]
    pub ready_timeout: Duration,
}

impl ExternalScorerConfig {
    pub fn new(command: Vec<String>, pool_size: usize) -> Self {
        Self {
            command,
            pool_size,
            ready_timeout: DEFAULT_READY_TIMEOUT,
        }
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        f64::deserialize(d).map(Duration::from_secs_f64)
    }
}

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    texts: &'a [String],
}

enum LineEvent {
    Line(String),
    Eof,
    Failed(io::Error),
}

struct Worker {
    index: usize,
    pid: u32,
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    lines: Receiver<LineEvent>,
    broken: bool,
}

impl Worker {
    fn protocol(&self, request_id: Option<u64>, message: impl Into<String>) -> ScorerError {
        ScorerError::Protocol {
            child: self.index,
            pid: self.pid,
            request_id,
            message: message.into(),
        }
    }

    fn exited(&self, request_id: Option<u64>) -> ScorerError {
        ScorerError::ChildExited {
            child: self.index,
            pid: self.pid,
            request_id,
        }
    }

    fn wait_ready(&mut self, timeout: Duration) -> Result<String, ScorerError> {
        let line = match self.lines.recv_timeout(timeout) {
            Ok(LineEvent::Line(line)) => line,
            Ok(LineEvent::Eof) | Err(RecvTimeoutError::Disconnected) => {
                return Err(self.exited(None))
            }
            Ok(LineEvent::Failed(source)) => {
                return Err(ScorerError::Io {
                    child: self.index,
                    pid: self.pid,
                    source,
                })
            }
            Err(RecvTimeoutError::Timeout) => {
                return Err(ScorerError::ReadyTimeout {
                    child: self.index,
                    pid: self.pid,
                    seconds: timeout.as_secs(),
                })
            }
        };
        let msg: Value = serde_json::from_str(&line)
            .map_err(|e| self.protocol(None, format!("ready line is not JSON ({e}): {line:?}")))?;
        if msg.get("type").and_then(Value::as_str) != Some("ready") {
            return Err(self.protocol(None, format!("expected ready message, got {line:?}")));
        }
        match msg.get("protocol").and_then(Value::as_u64) {
            Some(PROTOCOL_VERSION) => {}
            other => {
                return Err(self.protocol(
                    None,
                    format!("unsupported protocol version {other:?}, expected {PROTOCOL_VERSION}"),
                ))
            }
        }
        Ok(msg
            .get("name")
            .and_then(Value::as_str)
            .unwrap_or("unnamed")
            .to_owned())
    }

    fn request(&mut self, id: u64, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        if self.broken {
            return Err(self.protocol(Some(id), "child is unusable after an earlier failure"));
        }
        let result = self.exchange(id, texts);
        if matches!(
            result,
            Err(ScorerError::Protocol { .. }
                | ScorerError::ChildExited { .. }
                | ScorerError::Io { .. })
        ) {
            self.broken = true;
        }
        result
    }

    fn exchange(&mut self, id: u64, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        let mut payload = serde_json::to_vec(&Request { id, texts }).expect("request serializes");
        payload.push(b'\n');
        let stdin = self.stdin.as_mut().ok_or(ScorerError::ChildExited {
            child: self.index,
            pid: self.pid,
            request_id: Some(id),
        })?;
        if let Err(e) = stdin.write_all(&payload).and_then(|_| stdin.flush()) {
            return Err(if e.kind() == io::ErrorKind::BrokenPipe {
                self.exited(Some(id))
            } else {
                ScorerError::Io {
                    child: self.index,
                    pid: self.pid,
                    source: e,
                }
            });
        }

        let line = match self.lines.recv() {
            Ok(LineEvent::Line(line)) => line,
            Ok(LineEvent::Eof) | Err(_) => return Err(self.exited(Some(id))),
            Ok(LineEvent::Failed(source)) => {
                return Err(ScorerError::Io {
                    child: self.index,
                    pid: self.pid,
                    source,
                })
            }
        };
        let msg: Value = serde_json::from_str(&line).map_err(|e| {
            self.protocol(Some(id), format!("response is not JSON ({e}): {line:?}"))
        })?;
        match msg.get("id").and_then(Value::as_u64) {
            Some(got) if got == id => {}
            got => {
                return Err(self.protocol(
                    Some(id),
                    format!("response id {got:?} does not match request id {id}"),
                ))
            }
        }
        if let Some(err) = msg.get("error") {
            return Err(ScorerError::Remote {
                child: self.index,
                pid: self.pid,
                request_id: id,
                message: err
                    .as_str()
                    .map(str::to_owned)
                    .unwrap_or_else(|| err.to_string()),
            });
        }
        let scores = msg
            .get("scores")
            .and_then(Value::as_array)
            .ok_or_else(|| self.protocol(Some(id), "response has neither scores nor error"))?;
        if scores.len() != texts.len() {
            return Err(self.protocol(
                Some(id),
                format!("{} scores for {} texts", scores.len(), texts.len()),
            ));
        }
        scores
            .iter()
            .enumerate()
            .map(|(i, v)| match v.as_f64() {
                Some(s) if (0.0..=1.0).contains(&s) => Ok(s),
                _ => Err(self.protocol(
                    Some(id),
                    format!("score {i} is not a number in [0, 1]: {v}"),
                )),
            })
            .collect()
    }

    fn shutdown(&mut self) {
        drop(self.stdin.take());
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) => {
                    if !status.success() {
                        log::warn!(
                            "scorer child {} (pid {}) exited with {status}",
                            self.index,
                            self.pid
                        );
                    }
                    return;
                }
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                _ => {
                    let _ = self.child.kill();
                    let _ = self.child.wait();
                    return;
                }
            }
        }
    }
}

fn spawn_worker(index: usize, command: &[String]) -> Result<Worker, ScorerError> {
    let (program, args) = command.split_first().ok_or_else(|| ScorerError::Spawn {
        command: String::new(),
        source: io::Error::new(io::ErrorKind::InvalidInput, "empty scorer command"),
    })?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|source| ScorerError::Spawn {
            command: command.join(" "),
            source,
        })?;
    let pid = child.id();
    let stdin = child.stdin.take().map(BufWriter::new);
    let stdout = child.stdout.take().expect("stdout is piped");
    let (tx, rx) = mpsc::channel();
    thread::Builder::new()
        .name(format!("scorer-{index}-stdout"))
        .spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                let event = match reader.read_line(&mut line) {
                    Ok(0) => LineEvent::Eof,
                    Ok(_) => {
                        let trimmed = line.trim_end_matches(['\n', '\r']).to_owned();
                        LineEvent::Line(trimmed)
                    }
                    Err(e) => LineEvent::Failed(e),
                };
                let done = !matches!(event, LineEvent::Line(_));
                if tx.send(event).is_err() || done {
                    break;
                }
            }
        })
        .expect("spawn reader thread");
    Ok(Worker {
        index,
        pid,
        child,
        stdin,
        lines: rx,
        broken: false,
    })
}

/// A pool of protocol-speaking child processes used round-robin.
pub struct ExternalScorer {
    name: String,
    workers: Vec<Mutex<Worker>>,
    next_worker: AtomicUsize,
    next_id: AtomicU64,
}

impl std::fmt::Debug for ExternalScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalScorer")
            .field("name", &self.name)
            .field("pool_size", &self.workers.len())
            .finish()
    }
}

impl ExternalScorer {
    pub fn spawn(config: &ExternalScorerConfig) -> Result<Self, ScorerError> {
        let pool_size = config.pool_size.max(1);
        let mut workers = Vec::with_capacity(pool_size);
        for index in 0..pool_size {
            workers.push(spawn_worker(index, &config.command)?);
        }
        let mut name = None;
        for w in &mut workers {
            let adapter = w.wait_ready(config.ready_timeout);
            match adapter {
                Ok(n) => {
                    name.get_or_insert(n);
                }
                Err(e) => {
                    for w in &mut workers {
                        let _ = w.child.kill();
                        let _ = w.child.wait();
                    }
                    return Err(e);
                }
            }
        }
        Ok(Self {
            name: format!("external:{}", name.unwrap_or_default()),
            workers: workers.into_iter().map(Mutex::new).collect(),
            next_worker: AtomicUsize::new(0),
            next_id: AtomicU64::new(0),
        })
    }

    pub fn pool_size(&self) -> usize {
        self.workers.len()
    }
}

/// Launch `pool_size` children running `command` and wait for each to be ready.
pub fn spawn_external_scorer(
    command: &[String],
    pool_size: usize,
) -> Result<ExternalScorer, ScorerError> {
    ExternalScorer::spawn(&ExternalScorerConfig::new(command.to_vec(), pool_size))
}

impl Scorer for ExternalScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn max_parallelism(&self) -> Option<usize> {
        Some(self.workers.len())
    }

    fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>, ScorerError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let slot = self.next_worker.fetch_add(1, Ordering::Relaxed) % self.workers.len();
        let mut worker = self.workers[slot].lock().unwrap_or_else(|p| p.into_inner());
        worker.request(id, texts)
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        for w in &mut self.workers {
            w.get_mut().unwrap_or_else(|p| p.into_inner()).shutdown();
        }
    }
}
