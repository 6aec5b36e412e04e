//! `salbench`: runs the evaluation pipeline stage by stage.
//!
//! Errors end the process with a nonzero status and one stderr line of the
//! form `salbench: error[<Code>]: <message>`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use salbench_core::io::{self, RunConfig, RunOptions, Stage};
use salbench_core::Error;

const ENV_OUTPUT_DIR: &str = "SALBENCH_OUTPUT_DIR";
const ENV_THREADS: &str = "SALBENCH_THREADS";

#[derive(Parser)]
#[command(name = "salbench", version, about = "Saliency-map evaluation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize datasets and train the networks.
    Generate(StageArgs),
    /// Compute saliency maps for every method.
    Explain(StageArgs),
    /// Score the maps with every metric.
    Evaluate(StageArgs),
    /// Aggregate scores and rank the methods per criterion.
    Rank(StageArgs),
    /// Metric-disagreement statistics over the rankings.
    Meta(StageArgs),
    /// Write CSV tables and a text summary.
    Report(StageArgs),
    /// Every stage in order.
    All(StageArgs),
}

#[derive(Args)]
struct StageArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores, or $SALBENCH_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// Overwrite artifacts written under a different config.
    #[arg(long)]
    force: bool,
}

fn fail(code: &str, message: &str) -> ExitCode {
    let line = message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("salbench: error[{code}]: {line}");
    ExitCode::FAILURE
}

fn env_threads() -> Result<Option<usize>, Error> {
    match std::env::var(ENV_THREADS) {
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{ENV_THREADS}={v:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn run(stage: Option<Stage>, args: StageArgs) -> Result<(), Error> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = std::env::var_os(ENV_OUTPUT_DIR) {
        cfg.output_dir = PathBuf::from(dir);
    }
    let threads = match args.threads {
        Some(n) => Some(n),
        None => env_threads()?,
    };
    if threads == Some(0) {
        return Err(Error::Config("thread count must be positive".into()));
    }
    let opts = RunOptions {
        force: args.force,
        threads,
        ..RunOptions::default()
    };
    match stage {
        Some(s) => io::run_stage(&cfg, s, &opts)?,
        None => io::run_all(&cfg, &opts)?,
    }
    println!("{}: {}", stage.map_or("all", Stage::as_str), cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            return fail("Usage", msg.lines().next().unwrap_or("invalid arguments"));
        }
    };
    let (stage, args) = match cli.command {
        Command::Generate(a) => (Some(Stage::Generate), a),
        Command::Explain(a) => (Some(Stage::Explain), a),
        Command::Evaluate(a) => (Some(Stage::Evaluate), a),
        Command::Rank(a) => (Some(Stage::Rank), a),
        Command::Meta(a) => (Some(Stage::Meta), a),
        Command::Report(a) => (Some(Stage::Report), a),
        Command::All(a) => (None, a),
    };
    match run(stage, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.code(), &e.to_string()),
    }
}
