//! `skipread` — reproducible pipelines over the reading models: corpus
//! preprocessing, two-phase training for both the sequence and the
//! question-answering readers, fixation-price sweeps, simulation, evaluation
//! against gold fixations, and eye-tracking preprocessing. Every run is
//! driven by a TOML config (overridable with `--set section.key=value`) and
//! a seed, and leaves a manifest describing what it produced.

mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};
use config::RunConfig;
use manifest::RunContext;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "skipread", version, about = "task-based reading models: training, simulation, evaluation")]
struct Cli {
    /// run configuration (TOML)
    #[arg(long, global = true, default_value = "skipread.toml")]
    config: PathBuf,
    /// override a config value by dotted key, e.g. --set tradeoff.alpha=2.5
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build vocabularies and train/eval splits from the raw corpora
    Preprocess,
    /// Train the sequence reader and reconstruction decoder under skipping noise
    TrainLm,
    /// Train the fixate/skip policy against the frozen sequence reader
    TrainAttn,
    /// Train the question-answering head, then its fixation policy
    TrainQa,
    /// Train one policy per fixation price and tabulate rate/accuracy
    SweepAlpha,
    /// Sample fixation sequences and render per-document heatmaps
    Simulate,
    /// Score fixation probabilities against gold fixations
    Evaluate,
    /// Pool fixations, correct drift, and compute reading measures
    Etk,
    /// Write the flat per-token analysis table
    Export,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Preprocess => "preprocess",
            Command::TrainLm => "train-lm",
            Command::TrainAttn => "train-attn",
            Command::TrainQa => "train-qa",
            Command::SweepAlpha => "sweep-alpha",
            Command::Simulate => "simulate",
            Command::Evaluate => "evaluate",
            Command::Etk => "etk",
            Command::Export => "export",
        }
    }

    fn run(self, ctx: &mut RunContext) -> skipread::Result<()> {
        match self {
            Command::Preprocess => commands::preprocess(ctx),
            Command::TrainLm => commands::train_lm(ctx),
            Command::TrainAttn => commands::train_attn(ctx),
            Command::TrainQa => commands::train_qa(ctx),
            Command::SweepAlpha => commands::sweep_alpha(ctx),
            Command::Simulate => commands::simulate(ctx),
            Command::Evaluate => commands::evaluate(ctx),
            Command::Etk => commands::etk(ctx),
            Command::Export => commands::export(ctx),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::load(&cli.config, &cli.set) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut ctx = match RunContext::new(cfg) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let name = cli.command.name();
    match cli.command.run(&mut ctx) {
        Ok(()) => match ctx.finish(name) {
            Ok(path) => {
                println!("{name}: done, manifest at {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error writing manifest: {e}");
                ExitCode::FAILURE
            }
        },
        Err(e) => {
            // configuration mistakes exit 2 with the offending field; runtime
            // failures leave a partial manifest and exit 1
            if let skipread::Error::Config { .. } = e {
                eprintln!("config error: {e}");
                return ExitCode::from(2);
            }
            eprintln!("error: {e}");
            if let Err(m) = ctx.abort(name, &e) {
                eprintln!("error writing manifest: {m}");
            }
            ExitCode::FAILURE
        }
    }
}
