//! `mousedyn`: mouse-dynamics continuous authentication from session logs.
//!
//! Subcommands: `parse` (validate and clean logs), `synth` (generate seeded
//! synthetic sessions), `run` (full pipeline to reports, models, and a
//! reproducibility manifest), and `score` (stream one log through a trained
//! model).

mod commands;
mod config;

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{RunConfig, RunOverrides};

#[derive(Parser)]
#[command(name = "mousedyn", version, about = "Mouse-dynamics continuous authentication toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate session logs, drop duplicate events, write cleaned logs
    Parse {
        /// Directory of .txt session logs
        #[arg(long)]
        input: PathBuf,
        /// Directory for cleaned logs
        #[arg(long)]
        output: PathBuf,
        /// Inclusive screen-coordinate bound
        #[arg(long, default_value_t = 8192)]
        max_coord: u32,
    },
    /// Generate synthetic session logs
    Synth {
        #[arg(long)]
        users: u32,
        /// Session length in seconds
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Full pipeline: parse, segment, extract, build datasets, train
    /// per-user forests, evaluate, write reports and manifest
    Run {
        /// key=value config file; flags below override it
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: RunOverrides,
    },
    /// Stream a session log through a trained model
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 10)]
        sequence_length: usize,
        /// Defaults to the sequence length (non-overlapping windows)
        #[arg(long)]
        stride: Option<usize>,
        /// Comma-separated event-type codes to keep
        #[arg(long, default_value = "-1")]
        event_filter: String,
        #[arg(long, default_value_t = 8192)]
        max_coord: u32,
    },
}

fn parse_filter(text: &str) -> anyhow::Result<BTreeSet<i32>> {
    let mut set = BTreeSet::new();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        set.insert(part.trim().parse::<i32>()?);
    }
    anyhow::ensure!(!set.is_empty(), "event filter must keep at least one type");
    Ok(set)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Parse {
            input,
            output,
            max_coord,
        } => commands::cmd_parse(&input, &output, max_coord),
        Command::Synth {
            users,
            duration,
            seed,
            output,
        } => commands::cmd_synth(users, duration, seed, &output),
        Command::Run { config, overrides } => {
            let config = RunConfig::load(config.as_deref(), &overrides)?;
            commands::cmd_run(&config)
        }
        Command::Score {
            model,
            log,
            threshold,
            sequence_length,
            stride,
            event_filter,
            max_coord,
        } => commands::cmd_score(
            &model,
            &log,
            threshold,
            sequence_length,
            stride.unwrap_or(sequence_length),
            &parse_filter(&event_filter)?,
            max_coord,
        ),
    }
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("mousedyn: {err:#}");
        std::process::exit(1);
    }
}
