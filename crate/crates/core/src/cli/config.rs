use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{CliError, CommonArgs, FormatArg, Mode, ScorerKind};
use crate::deletion::DEFAULT_BATCH_SIZE;
use crate::scorer::LogRegConfig;

/// Values accepted in a `--config` JSON file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    format: Option<FormatArg>,
    text_col: Option<String>,
    label_col: Option<String>,
    workers: Option<usize>,
    batch_size: Option<usize>,
    checkpoint: Option<PathBuf>,
    checkpoint_every: Option<usize>,
    resume: Option<bool>,
    scorer: Option<ScorerKind>,
    scorer_cmd: Option<String>,
    pool_size: Option<usize>,
    c: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    corpus: Option<PathBuf>,
    train: Option<PathBuf>,
    eval: Option<PathBuf>,
    out: Option<PathBuf>,
    mode: Option<Mode>,
    k: Option<usize>,
    n: Option<usize>,
    budget: Option<u64>,
    threshold: Option<f64>,
}

/// Effective configuration after layering flags over the config file over
/// built-in defaults. Recorded in output metadata.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub format: Option<FormatArg>,
    pub text_col: String,
    pub label_col: String,
    pub workers: usize,
    pub batch_size: usize,
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: Option<usize>,
    pub resume: bool,
    pub scorer: ScorerKind,
    pub scorer_cmd: Option<String>,
    pub pool_size: usize,
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    #[serde(skip)]
    pub corpus: Option<PathBuf>,
    #[serde(skip)]
    pub train: Option<PathBuf>,
    #[serde(skip)]
    pub eval: Option<PathBuf>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub mode: Option<Mode>,
    #[serde(skip)]
    pub k: Option<usize>,
    #[serde(skip)]
    pub n: Option<usize>,
    #[serde(skip)]
    pub budget: Option<u64>,
    #[serde(skip)]
    pub threshold: Option<f64>,
}

impl Settings {
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_slice::<FileConfig>(&bytes).map_err(|e| {
                    CliError::Usage(format!("invalid config {}: {e}", path.display()))
                })?
            }
            None => FileConfig::default(),
        };
        let lr = LogRegConfig::default();
        let settings = Settings {
            format: args.format.or(file.format),
            text_col: args
                .text_col
                .clone()
                .or(file.text_col)
                .unwrap_or_else(|| "sentence".into()),
            label_col: args
                .label_col
                .clone()
                .or(file.label_col)
                .unwrap_or_else(|| "label".into()),
            workers: args
                .workers
                .or(file.workers)
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            batch_size: args
                .batch_size
                .or(file.batch_size)
                .unwrap_or(DEFAULT_BATCH_SIZE),
            checkpoint: args.checkpoint.clone().or(file.checkpoint),
            checkpoint_every: file.checkpoint_every,
            resume: args.resume || file.resume.unwrap_or(false),
            scorer: args.scorer.or(file.scorer).unwrap_or(ScorerKind::Builtin),
            scorer_cmd: args.scorer_cmd.clone().or(file.scorer_cmd),
            pool_size: args.pool_size.or(file.pool_size).unwrap_or(1),
            c: args.c.or(file.c).unwrap_or(lr.c),
            tol: args.tol.or(file.tol).unwrap_or(lr.tol),
            max_iter: args.max_iter.or(file.max_iter).unwrap_or(lr.max_iter),
            corpus: file.corpus,
            train: file.train,
            eval: file.eval,
            out: file.out,
            mode: file.mode,
            k: file.k,
            n: file.n,
            budget: file.budget,
            threshold: file.threshold,
        };
        settings.validate()?;
        Ok(settings)
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("workers", self.workers),
            ("batch-size", self.batch_size),
            ("pool-size", self.pool_size),
            ("max-iter", self.max_iter),
        ];
        for (flag, v) in positive {
            if v == 0 {
                return Err(CliError::Usage(format!("--{flag} must be at least 1")));
            }
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(CliError::Usage(format!(
                "--c must be positive, got {}",
                self.c
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(CliError::Usage(format!(
                "--tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}
