//! `ser`: scan corpora, extract features, train and evaluate emotion
//! classifiers, and reproduce the full experiment grid.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod config;
mod data;
mod grid;
mod model;
mod selftest;

use config::{
    EvalArgs, ExtractArgs, FileConfig, GridArgs, PredictArgs, ScanArgs, SelftestArgs, TrainArgs,
};

#[derive(Debug, Parser)]
#[command(name = "ser", version, about = "Speech emotion recognition experiments")]
struct Cli {
    /// TOML file with one table per subcommand; keys mirror flag names.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 1 keeps every run reproducible.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label a corpus tree and write a manifest CSV.
    Scan(ScanArgs),
    /// Write one SERF feature file per manifest entry.
    Extract(ExtractArgs),
    /// Split a manifest, fit a model and save it.
    Train(TrainArgs),
    /// Score a saved model on the test side of its split.
    Eval(EvalArgs),
    /// Classify individual WAV files.
    Predict(PredictArgs),
    /// Run every (dataset, method, frontend) cell and write the tables.
    Grid(GridArgs),
    /// Gradient checks and DSP oracles.
    Selftest(SelftestArgs),
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let threads = cli.threads.or(file.threads).unwrap_or(1);
    if threads == 0 {
        return Err(config::user_error("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    let seed = file.seed;
    match cli.command {
        Command::Scan(a) => data::scan(a.merge(file.scan)),
        Command::Extract(a) => data::extract(a.merge(file.extract)),
        Command::Train(a) => model::train(a.merge(file.train), seed),
        Command::Eval(a) => model::eval(a.merge(file.eval), seed),
        Command::Predict(a) => model::predict(a.merge(file.predict)),
        Command::Grid(a) => grid::grid(a.merge(file.grid), seed),
        Command::Selftest(a) => selftest::selftest(a.merge(file.selftest), seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(config::exit_code(&e) as u8)
        }
    }
}
