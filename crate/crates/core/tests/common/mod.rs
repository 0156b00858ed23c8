//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stopgen::corpus::Corpus;

pub const STOPGEN: &str = env!("CARGO_BIN_EXE_stopgen");
pub const ECHO_SCORER: &str = env!("CARGO_BIN_EXE_stopgen-echo-scorer");

pub const POSITIVE_SIGNAL: [&str; 5] = ["pos0", "pos1", "pos2", "pos3", "pos4"];
pub const NEGATIVE_SIGNAL: [&str; 5] = ["neg0", "neg1", "neg2", "neg3", "neg4"];
pub const NOISE_TOKENS: usize = 50;
/// Tokens per planted document: three signal tokens and three noise tokens.
/// An odd signal count means no document is a tie between the classes.
pub const SIGNAL_PER_DOC: usize = 3;
pub const NOISE_PER_DOC: usize = 3;
/// Probability that a signal token is drawn from the document's own class.
pub const SIGNAL_FIDELITY: f64 = 0.8;

pub fn noise_tokens() -> Vec<String> {
    (0..NOISE_TOKENS).map(|i| format!("noise{i:02}")).collect()
}

pub fn signal_tokens() -> Vec<String> {
    POSITIVE_SIGNAL
        .iter()
        .chain(&NEGATIVE_SIGNAL)
        .map(|s| s.to_string())
        .collect()
}

/// Fraction of all tokens that are noise, by construction.
pub fn planted_noise_mass() -> f64 {
    NOISE_PER_DOC as f64 / (SIGNAL_PER_DOC + NOISE_PER_DOC) as f64
}

/// Documents whose labels depend only on the signal tokens; noise tokens are
/// drawn independently of the label. Labels alternate so both classes are
/// exactly balanced.
pub fn planted_documents(n: usize, seed: u64) -> Vec<(String, u8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = noise_tokens();
    (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let (own, other) = if label == 1 {
                (&POSITIVE_SIGNAL, &NEGATIVE_SIGNAL)
            } else {
                (&NEGATIVE_SIGNAL, &POSITIVE_SIGNAL)
            };
            let mut tokens: Vec<&str> = Vec::with_capacity(SIGNAL_PER_DOC + NOISE_PER_DOC);
            for _ in 0..SIGNAL_PER_DOC {
                let pool = if rng.gen_bool(SIGNAL_FIDELITY) {
                    own
                } else {
                    other
                };
                tokens.push(pool.choose(&mut rng).unwrap());
            }
            for _ in 0..NOISE_PER_DOC {
                tokens.push(noise.choose(&mut rng).unwrap());
            }
            tokens.shuffle(&mut rng);
            (tokens.join(" "), label)
        })
        .collect()
}

pub const PLANTED_DOCS: usize = 2000;
pub const PLANTED_VALIDATION_DOCS: usize = 1000;

/// The planted corpus: the scorer is trained on it and its tokens are ranked.
pub fn planted_corpus(seed: u64) -> Corpus {
    Corpus::from_texts("planted", planted_documents(PLANTED_DOCS, seed))
}

/// Fresh documents from the same distribution for downstream accuracy.
pub fn planted_validation(seed: u64) -> Corpus {
    Corpus::from_texts(
        "planted-validation",
        planted_documents(PLANTED_VALIDATION_DOCS, seed ^ 0x5eed_0000_0000_0001),
    )
}

/// Small random corpus over a `vocab`-word alphabet with both classes present.
pub fn random_corpus(rng: &mut impl Rng, docs: usize, vocab: usize, max_len: usize) -> Corpus {
    let mut rows = Vec::with_capacity(docs);
    for i in 0..docs {
        let label = if i < 2 {
            i as u8
        } else {
            rng.gen_range(0..=1u8)
        };
        let len = rng.gen_range(0..=max_len);
        // Skew token choice by label so the scorer learns something.
        let text = (0..len)
            .map(|_| {
                let t = if rng.gen_bool(0.3) {
                    (label as usize) % vocab
                } else {
                    rng.gen_range(0..vocab)
                };
                format!("w{t}")
            })
            .collect::<Vec<_>>()
            .join(" ");
        rows.push((text, label));
    }
    Corpus::from_texts("random", rows)
}

/// Write `(text, label)` rows as a TSV with the default header.
pub fn write_tsv(path: &Path, rows: &[(String, u8)]) {
    let mut s = String::from("sentence\tlabel\n");
    for (text, label) in rows {
        writeln!(s, "{text}\t{label}").unwrap();
    }
    std::fs::write(path, s).unwrap();
}

pub fn write_tsv_in(dir: &Path, name: &str, rows: &[(String, u8)]) -> PathBuf {
    let path = dir.join(name);
    write_tsv(&path, rows);
    path
}

pub fn tiny_reviews() -> Vec<(String, u8)> {
    [
        ("a good fun movie", 1),
        ("a bad dull movie", 0),
        ("good acting and a nice plot", 1),
        ("bad acting and a slow plot", 0),
        ("nice and fun", 1),
        ("dull and slow and bad", 0),
        ("the movie was good", 1),
        ("the movie was bad", 0),
    ]
    .iter()
    .map(|(t, l)| (t.to_string(), *l))
    .collect()
}
