//! Command-line driver: `generate`, `train`, `sweep`, `verify` and
//! `defaults`.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime error
//! (including partially failed sweeps), 3 failed verification. Errors are
//! reported on stderr as one line of JSON.

pub mod config;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::data::{corrupt, NoiseConfig, TaskGenerator};
use crate::error::Error;
use crate::pairs::{feasible_region_check, ClassPrior};
use crate::seeding::{derive_seed, stream};
use crate::trainer::{run_experiment, sweep, Annotator};
use crate::verify::{resolve_checks, run_checks, VerifyConfig, CHECK_NAMES};

pub use config::{defaults_toml, DataSection, EstimatorSection, GenerateConfig, ModelSection, NoiseSection, SweepFileConfig, TrainFileConfig};
pub use output::{slug, Manifest, OutputDir};

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(Error),
    /// Some sweep rows failed; the table was still written.
    PartialSweep(String),
    /// Some statistical checks failed; the report was still written.
    Verify(Vec<String>),
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure::Config(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) | Failure::PartialSweep(_) => 2,
            Failure::Verify(_) => 3,
        }
    }

    /// Single-line JSON error record.
    pub fn record(&self) -> String {
        let (kind, message) = match self {
            Failure::Config(m) => ("config", m.clone()),
            Failure::Runtime(e) => ("runtime", e.to_string()),
            Failure::PartialSweep(m) => ("runtime", m.clone()),
            Failure::Verify(names) => ("verification", format!("failed checks: {}", names.join(", "))),
        };
        json!({ "error": kind, "message": message, "exit_code": self.exit_code() }).to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "weakpairs", version, about = "Learning binary classifiers from similarity and confidence-difference pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "WEAKPAIRS_OUT", default_value = "weakpairs-out")]
    pub out: PathBuf,
    /// Master seed, replacing the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a weak-pair training set and a labeled test set.
    Generate(RunArgs),
    /// Train every configured estimator over several seeds.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Replaces `train.epochs`.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Repeat training across one axis of settings.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run the statistical verification suite.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated check names, or `all`.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        checks: Vec<String>,
    },
    /// Print the default configuration files.
    Defaults {
        /// One of generate, train, sweep, verify; all when omitted.
        command: Option<String>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let f = Failure::config(e.to_string().lines().next().unwrap_or("usage error").trim().to_string());
            eprintln!("{}", f.record());
            return f.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{}", f.record());
            f.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Defaults { command } => {
            print!("{}", defaults_toml(command.as_deref())?);
            Ok(())
        }
        Command::Generate(run) => with_threads(run.threads, || cmd_generate(&run)),
        Command::Train { run, epochs } => with_threads(run.threads, || cmd_train(&run, epochs)),
        Command::Sweep { run, epochs } => with_threads(run.threads, || cmd_sweep(&run, epochs)),
        Command::Verify { run, checks } => with_threads(run.threads, || cmd_verify(&run, &checks)),
    }
}

fn with_threads(threads: Option<usize>, f: impl FnOnce() -> Result<(), Failure> + Send) -> Result<(), Failure> {
    match threads {
        None => f(),
        Some(0) => Err(Failure::config("--threads: must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Failure::config(format!("--threads: {e}")))?;
            pool.install(f)
        }
    }
}

fn config_dir(path: Option<&Path>) -> PathBuf {
    path.and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default()
}

pub fn cmd_generate(args: &RunArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut cfg: GenerateConfig = config::parse(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.task.validate().map_err(|e| Failure::config(format!("task: {e}")))?;
    if cfg.n_pairs == 0 || cfg.n_test == 0 {
        return Err(Failure::config("n_pairs and n_test must be positive"));
    }
    let noise = NoiseConfig { seed: derive_seed(cfg.seed, stream::NOISE, 0), ..cfg.noise.to_noise() };
    noise.validate().map_err(|e| Failure::config(format!("noise: {e}")))?;
    ClassPrior::new(noise.epsilon * cfg.task.pi_plus).map_err(|e| Failure::config(format!("noise.epsilon: learner prior: {e}")))?;

    let mut gen = TaskGenerator::new(cfg.task.clone(), derive_seed(cfg.seed, stream::TRAIN_DATA, 0))?;
    let clean = match cfg.annotator {
        Annotator::Exact => gen.annotate_pairs_exact(cfg.n_pairs)?,
        Annotator::Learned { probe_size } => gen.annotate_pairs_learned(cfg.n_pairs, probe_size)?,
    };
    let (pairs, prior) = corrupt(&clean, &gen.prior(), &noise)?;
    let test = TaskGenerator::new(cfg.task.clone(), derive_seed(cfg.seed, stream::TEST_DATA, 0))?.sample_labeled(cfg.n_test)?;
    let feasible = pairs.pairs().iter().filter(|w| feasible_region_check(w.s, w.c)).count();

    let mut out = OutputDir::create(&args.out)?;
    out.write_toml("config.toml", &cfg)?;
    out.write_with("pairs.csv", |w| crate::data::write_pairs_csv(w, &pairs))?;
    out.write_with("test.csv", |w| crate::data::write_labeled_csv(w, &test))?;
    let summary = json!({
        "learner_prior": prior.pi_plus(),
        "bayes_accuracy": cfg.task.bayes_accuracy(),
        "feasible_fraction": feasible as f64 / pairs.len() as f64,
    });
    println!("generated {} pairs and {} test points in {}", pairs.len(), test.len(), args.out.display());
    out.finish("generate", &cfg, cfg.seed, summary, start)
}

pub fn cmd_train(args: &RunArgs, epochs: Option<usize>) -> Result<(), Failure> {
    let start = Instant::now();
    let mut cfg: TrainFileConfig = config::parse(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = epochs {
        cfg.train.epochs = e;
        cfg.train.tail_epochs = cfg.train.tail_epochs.min(e);
    }
    let specs = cfg.validate()?;
    let source = cfg.data.source(&config_dir(args.config.as_deref()))?;
    let noise = cfg.noise.to_noise();

    let mut results = Vec::with_capacity(specs.len());
    for spec in &specs {
        let tc = cfg.train.train_config(*spec, cfg.seed);
        let r = run_experiment(&tc, &source, cfg.n_seeds, cfg.fraction, &noise)?;
        println!("{}: mean accuracy {:.4} (std {:.4}) over {} seeds", spec.label(), r.mean, r.std, cfg.n_seeds);
        results.push((spec.label(), r));
    }

    let mut out = OutputDir::create(&args.out)?;
    out.write_toml("config.toml", &cfg)?;
    output::write_train_results(&mut out, &results, cfg.checkpoints)?;
    let summary = json!(results.iter().map(|(l, r)| json!({ "estimator": l, "mean": r.mean, "std": r.std })).collect::<Vec<_>>());
    out.finish("train", &cfg, cfg.seed, summary, start)
}

pub fn cmd_sweep(args: &RunArgs, epochs: Option<usize>) -> Result<(), Failure> {
    let start = Instant::now();
    let mut cfg: SweepFileConfig = config::parse(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = epochs {
        cfg.train.epochs = e;
        cfg.train.tail_epochs = cfg.train.tail_epochs.min(e);
    }
    let specs = cfg.validate()?;
    let source = cfg.data.source(&config_dir(args.config.as_deref()))?;
    let template = cfg.train.train_config(specs[0], cfg.seed);
    let rows = sweep(&template, &specs, &source, &cfg.sweep, cfg.n_seeds, cfg.fraction, &cfg.noise.to_noise())?;

    let mut out = OutputDir::create(&args.out)?;
    out.write_toml("config.toml", &cfg)?;
    output::write_sweep_rows(&mut out, &rows)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("sweep over {}: {} rows, {} failed", cfg.sweep.name(), rows.len(), failed);
    out.finish("sweep", &cfg, cfg.seed, json!({ "rows": rows.len(), "failed_rows": failed }), start)?;
    if failed > 0 {
        let first = rows.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Failure::PartialSweep(format!("{failed} of {} sweep rows failed; first error: {first}", rows.len())));
    }
    Ok(())
}

pub fn cmd_verify(args: &RunArgs, checks: &[String]) -> Result<(), Failure> {
    let start = Instant::now();
    let mut cfg: VerifyConfig = config::parse(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    let names = resolve_checks(checks).map_err(|e| Failure::config(e.to_string()))?;
    let names: Vec<String> = names.into_iter().map(String::from).collect();
    let records = run_checks(&cfg, &names)?;
    let failed: Vec<String> = records.iter().filter(|r| !r.pass).map(|r| r.name.clone()).collect();
    for r in &records {
        println!("{:<16} {}", r.name, if r.pass { "pass" } else { "FAIL" });
    }

    let mut out = OutputDir::create(&args.out)?;
    out.write_toml("config.toml", &cfg)?;
    let report = json!({ "checks": records, "pass": failed.is_empty(), "available": CHECK_NAMES });
    out.write_json("verify_report.json", &report)?;
    out.finish("verify", &cfg, cfg.seed, json!({ "failed": failed }), start)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(failed))
    }
}
