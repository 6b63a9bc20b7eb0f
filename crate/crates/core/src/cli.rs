//! Command-line surface: corpus generation, both training phases, the four
//! evaluation protocols and the self-check suite.
//!
//! Every command writes `manifest_<command>.json` next to its outputs with the
//! resolved configuration, seeds, corpus hash and SHA-256 of each artifact.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{generate_synthetic, load_corpus, save_corpus, RefCorpus, SynthSpec};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, Harness};
use crate::policy::PolicyParams;
use crate::reward::RewardMode;
use crate::train::{init_policy, TrainConfig, Trainer, DEFAULT_MAX_LEN};
use crate::verify::run_suite;

pub const CONFIG_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FORMAT_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rdpp", version, about = "DPP rewards for diverse caption generation on a toy captioner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; built-in desk defaults otherwise.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Reward for train-rl.
    #[arg(long, global = true, value_parser = parse_mode)]
    pub mode: Option<RewardMode>,
    /// Samples per image per RL step.
    #[arg(long, global = true, value_name = "INT")]
    pub m: Option<usize>,
    #[arg(long, global = true, value_name = "INT")]
    pub beam: Option<usize>,
    /// Samples per image for eval-sample and eval-oracle.
    #[arg(long, global = true, value_name = "INT")]
    pub samples: Option<usize>,
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "PATH", default_value = "out")]
    pub out: PathBuf,
    /// Corpus file; defaults to `<out>/corpus.jsonl`.
    #[arg(long, global = true, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    /// Policy checkpoint to start from or evaluate.
    #[arg(long, global = true, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus to `<out>/corpus.jsonl`.
    GenData,
    /// Cross-entropy pretraining from a uniform policy; writes `xe.ckpt`.
    TrainXe,
    /// RL refinement of `xe.ckpt` (or --checkpoint); writes `rl.ckpt`.
    TrainRl,
    /// Random-sampling accuracy and self-CIDEr diversity.
    EvalSample,
    /// Single-caption beam search scored by BLEU-4, ROUGE-L and CIDEr.
    EvalBeam,
    /// Per-metric best of N samples.
    EvalOracle,
    /// Leave-one-out score of the references themselves.
    EvalHuman,
    /// Gradient, normalization, metric and round-trip self-checks.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::TrainXe => "train-xe",
            Command::TrainRl => "train-rl",
            Command::EvalSample => "eval-sample",
            Command::EvalBeam => "eval-beam",
            Command::EvalOracle => "eval-oracle",
            Command::EvalHuman => "eval-human",
            Command::Verify => "verify",
        }
    }
}

fn parse_mode(s: &str) -> std::result::Result<RewardMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub max_len: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { max_len: DEFAULT_MAX_LEN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub num_samples: usize,
    pub oracle_samples: usize,
    pub beam_width: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            num_samples: 10,
            oracle_samples: 20,
            beam_width: 3,
            seed: 0,
        }
    }
}

/// Schema of `--config` files. Missing sections take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub synth: SynthSpec,
    pub policy: PolicyConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            format_version: CONFIG_FORMAT_VERSION,
            synth: SynthSpec::default(),
            policy: PolicyConfig::default(),
            train: TrainConfig::desk(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.format_version != CONFIG_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "config format_version {} is not supported (expected {CONFIG_FORMAT_VERSION})",
                cfg.format_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Folds command-line overrides into the file configuration.
    fn apply(&mut self, cli: &Cli) -> Result<()> {
        if let Some(mode) = cli.mode {
            self.train.mode = mode;
        }
        if let Some(m) = cli.m {
            self.train.m = m;
        }
        if let Some(b) = cli.beam {
            self.eval.beam_width = b;
        }
        if let Some(n) = cli.samples {
            self.eval.num_samples = n;
            self.eval.oracle_samples = n;
        }
        if let Some(seed) = cli.seed {
            if cli.command == Command::GenData {
                self.synth.seed = seed;
            } else {
                self.train.seed = seed;
                self.eval.seed = seed;
            }
        }
        self.synth.validate()?;
        self.train.validate()?;
        if self.eval.beam_width == 0 {
            return Err(Error::Config("beam width must be at least 1".into()));
        }
        if cli.command == Command::EvalSample && self.eval.num_samples < 2 {
            return Err(Error::Config("eval-sample needs at least 2 samples".into()));
        }
        if self.eval.oracle_samples < 1 {
            return Err(Error::Config("eval-oracle needs at least 1 sample".into()));
        }
        if self.synth.max_tokens > self.policy.max_len {
            return Err(Error::Config("synth.max_tokens exceeds policy.max_len".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct Artifact {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    format_version: u32,
    command: &'static str,
    crate_version: &'static str,
    config: &'a RunConfig,
    train_seed: u64,
    eval_seed: u64,
    synth_seed: u64,
    corpus_hash: Option<String>,
    inputs: Vec<Artifact>,
    outputs: Vec<Artifact>,
}

fn artifact(path: &Path) -> Result<Artifact> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Artifact {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

struct Run<'a> {
    cli: &'a Cli,
    config: RunConfig,
    corpus_hash: Option<String>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run<'_> {
    fn out(&self, name: &str) -> PathBuf {
        self.cli.out.join(name)
    }

    fn corpus(&mut self) -> Result<RefCorpus> {
        let path = self.cli.corpus.clone().unwrap_or_else(|| self.out("corpus.jsonl"));
        let corpus = load_corpus(&path)?;
        self.corpus_hash = Some(corpus.content_hash());
        self.inputs.push(path);
        Ok(corpus)
    }

    fn checkpoint(&mut self, default: &str) -> Result<PolicyParams> {
        let path = self.cli.checkpoint.clone().unwrap_or_else(|| self.out(default));
        let params = PolicyParams::load(&path)?;
        self.inputs.push(path);
        Ok(params)
    }

    fn write_report(&mut self, report: &EvalReport, stem: &str) -> Result<()> {
        report.write(&self.cli.out, stem)?;
        self.outputs.push(self.out(&format!("{stem}.csv")));
        self.outputs.push(self.out(&format!("{stem}.json")));
        for name in &report.params.metrics {
            if let Some(v) = report.metric(name) {
                println!("{stem} {name} {v:.6}");
            }
        }
        Ok(())
    }

    fn execute(&mut self) -> Result<bool> {
        let cfg = self.config.clone();
        match self.cli.command {
            Command::GenData => {
                let corpus = generate_synthetic(&cfg.synth)?;
                let path = self.out("corpus.jsonl");
                save_corpus(&corpus, &path)?;
                self.corpus_hash = Some(corpus.content_hash());
                self.outputs.push(path);
                println!("wrote {} images", corpus.len());
            }
            Command::TrainXe => {
                let corpus = self.corpus()?;
                let trainer = Trainer::new(&corpus, cfg.train.clone())?;
                let (params, log) = trainer.train_xe(init_policy(&corpus, cfg.policy.max_len)?)?;
                self.save(&params, "xe.ckpt")?;
                self.save_log(&log, "xe_log.csv")?;
            }
            Command::TrainRl => {
                let corpus = self.corpus()?;
                let start = self.checkpoint("xe.ckpt")?;
                let trainer = Trainer::new(&corpus, cfg.train.clone())?;
                let (params, log) = trainer.train_rl(start)?;
                self.save(&params, "rl.ckpt")?;
                self.save_log(&log, "rl_log.csv")?;
            }
            Command::EvalSample => {
                let corpus = self.corpus()?;
                let params = self.checkpoint("rl.ckpt")?;
                let report = Harness::new(&corpus).random_sampling(&params, cfg.eval.num_samples, cfg.eval.seed)?;
                self.write_report(&report, "eval_sample")?;
            }
            Command::EvalBeam => {
                let corpus = self.corpus()?;
                let params = self.checkpoint("rl.ckpt")?;
                let report = Harness::new(&corpus).beam(&params, cfg.eval.beam_width)?;
                self.write_report(&report, "eval_beam")?;
            }
            Command::EvalOracle => {
                let corpus = self.corpus()?;
                let params = self.checkpoint("rl.ckpt")?;
                let report = Harness::new(&corpus).oracle(&params, cfg.eval.oracle_samples, cfg.eval.seed)?;
                self.write_report(&report, "eval_oracle")?;
            }
            Command::EvalHuman => {
                let corpus = self.corpus()?;
                let report = Harness::new(&corpus).human_loo()?;
                self.write_report(&report, "eval_human")?;
            }
            Command::Verify => {
                let results = run_suite(cfg.train.seed);
                let mut text = String::new();
                for r in &results {
                    println!("{r}");
                    text.push_str(&format!("{r}\n"));
                }
                let path = self.out("verify.txt");
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                self.outputs.push(path);
                return Ok(results.iter().all(|r| r.passed));
            }
        }
        Ok(true)
    }

    fn save(&mut self, params: &PolicyParams, name: &str) -> Result<()> {
        let path = self.out(name);
        params.save(&path)?;
        self.outputs.push(path);
        Ok(())
    }

    fn save_log(&mut self, log: &crate::train::TrainLog, name: &str) -> Result<()> {
        let path = self.out(name);
        log.write_csv(&path)?;
        if let Some(last) = log.last() {
            println!(
                "epoch {} {} mean_cider {:.4} self_cider {:.4}",
                last.epoch, last.mode, last.mean_cider, last.self_cider
            );
        }
        self.outputs.push(path);
        Ok(())
    }

    fn write_manifest(&self) -> Result<()> {
        let manifest = Manifest {
            format_version: MANIFEST_FORMAT_VERSION,
            command: self.cli.command.name(),
            crate_version: env!("CARGO_PKG_VERSION"),
            config: &self.config,
            train_seed: self.config.train.seed,
            eval_seed: self.config.eval.seed,
            synth_seed: self.config.synth.seed,
            corpus_hash: self.corpus_hash.clone(),
            inputs: self.inputs.iter().map(|p| artifact(p)).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(|p| artifact(p)).collect::<Result<_>>()?,
        };
        let path = self.out(&format!("manifest_{}.json", self.cli.command.name()));
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Exit status for an error: configuration problems are 1, data problems 2.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Capacity { .. } => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run_cli(&cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VERIFY,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command; `Ok(false)` means the self-check suite failed.
pub fn run_cli(cli: &Cli) -> Result<bool> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply(cli)?;
    fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let mut run = Run {
        cli,
        config,
        corpus_hash: None,
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    let passed = run.execute()?;
    run.write_manifest()?;
    Ok(passed)
}
