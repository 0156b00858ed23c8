//! Stand-in external scorer speaking the stopgen stdio protocol.
//!
//! Modes:
//! - `echo`: every text scores 0.5
//! - `lexicon`: deterministic per-token weights hashed from the token text,
//!   plus strong fixed weights for a handful of sentiment words
//! - `wrong-length`, `garbage`, `bad-id`, `error`: misbehave on request `--fail-at`
//! - `no-ready`: never send the ready line
//! - `exit-mid`: exit without answering request `--fail-at`
//!
//! Diagnostics go to stderr only.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use serde::Deserialize;
use serde_json::json;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Echo,
    Lexicon,
    WrongLength,
    Garbage,
    BadId,
    Error,
    NoReady,
    ExitMid,
}

#[derive(Debug, Parser)]
#[command(about = "Protocol test double for stopgen external scorers")]
struct Args {
    #[arg(long, value_enum, default_value = "echo")]
    mode: Mode,
    /// Name reported in the ready message
    #[arg(long, default_value = "echo")]
    name: String,
    /// Sleep this long before answering each request
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
    /// Sleep this long before sending the ready line
    #[arg(long, default_value_t = 0)]
    ready_delay_ms: u64,
    /// Zero-based index of the request on which failure modes misbehave
    #[arg(long, default_value_t = 0)]
    fail_at: u64,
}

#[derive(Deserialize)]
struct Request {
    id: u64,
    texts: Vec<String>,
}

const LEXICON: [(&str, f64); 8] = [
    ("good", 2.0),
    ("great", 2.5),
    ("nice", 1.5),
    ("fun", 1.0),
    ("bad", -2.0),
    ("terrible", -2.5),
    ("dull", -1.5),
    ("boring", -1.0),
];

fn token_weight(token: &str) -> f64 {
    if let Some((_, w)) = LEXICON.iter().find(|(t, _)| *t == token) {
        return *w;
    }
    let digest = Sha256::digest(token.as_bytes());
    let raw = u16::from_le_bytes([digest[0], digest[1]]) as f64 / u16::MAX as f64;
    (raw - 0.5) * 0.2
}

fn lexicon_score(text: &str) -> f64 {
    let z: f64 = text.split_whitespace().map(token_weight).sum();
    1.0 / (1.0 + (-z).exp())
}

fn send(out: &mut impl Write, line: &str) -> io::Result<()> {
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()
}

fn main() -> ExitCode {
    let args = Args::parse();
    let stdin = io::stdin();
    let mut out = io::stdout().lock();

    if args.mode == Mode::NoReady {
        // Drain input so the parent never blocks on a full pipe.
        for _ in stdin.lock().lines() {}
        return ExitCode::SUCCESS;
    }
    std::thread::sleep(Duration::from_millis(args.ready_delay_ms));
    let ready = json!({"type": "ready", "protocol": 1, "name": args.name});
    if send(&mut out, &ready.to_string()).is_err() {
        return ExitCode::FAILURE;
    }

    for (n, line) in stdin.lock().lines().enumerate() {
        let Ok(line) = line else { break };
        let request: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("echo-scorer: bad request line: {e}");
                continue;
            }
        };
        if args.delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(args.delay_ms));
        }
        let misbehave = n as u64 == args.fail_at;
        if misbehave && args.mode != Mode::Echo && args.mode != Mode::Lexicon {
            eprintln!("echo-scorer: misbehaving on request id {}", request.id);
        }
        let scores: Vec<f64> = match args.mode {
            Mode::Lexicon => request.texts.iter().map(|t| lexicon_score(t)).collect(),
            _ => vec![0.5; request.texts.len()],
        };
        let reply = match args.mode {
            Mode::WrongLength if misbehave => {
                json!({"id": request.id, "scores": vec![0.5; scores.len() + 1]}).to_string()
            }
            Mode::Garbage if misbehave => "this is not json".to_owned(),
            Mode::BadId if misbehave => {
                json!({"id": request.id + 1000, "scores": scores}).to_string()
            }
            Mode::Error if misbehave => {
                json!({"id": request.id, "error": "inference failed"}).to_string()
            }
            Mode::ExitMid if misbehave => {
                eprintln!("echo-scorer: exiting before request {}", request.id);
                return ExitCode::from(9);
            }
            _ => json!({"id": request.id, "scores": scores}).to_string(),
        };
        if send(&mut out, &reply).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
