mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{SplitName, TrainArgs};

/// Train, export, augment and evaluate knowledge-tracing models.
///
/// `SBRKT_THREADS` caps evaluation threads; `RUST_LOG` sets log verbosity.
#[derive(Debug, Parser)]
#[command(name = "sbrkt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model from a JSON run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// sbrkt, sbrkt-tanh, sbrkt-01, sbrkt-dense, bkt or dkt.
        #[arg(long)]
        model: Option<String>,
        /// Auxiliary KC assignment CSV (bkt and dkt only).
        #[arg(long)]
        aux: Option<PathBuf>,
    },
    /// Write the auxiliary KC assignment learned by an SBRKT checkpoint.
    ExportAux {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append auxiliary KC ids to a dataset.
    Augment {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        aux: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of auxiliary KCs; indices must be below it. Defaults to the largest index plus one.
        #[arg(long)]
        num_aux: Option<usize>,
    },
    /// Evaluate a checkpoint on one part of a dataset's student split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitName,
        /// Split seed; defaults to the seed the checkpoint was trained with.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for report.jsonl and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            model,
            aux,
        } => commands::train(TrainArgs {
            config,
            seed,
            out,
            model,
            aux,
        }),
        Command::ExportAux { checkpoint, vocab, out } => commands::export_aux(&checkpoint, &vocab, &out),
        Command::Augment {
            dataset,
            aux,
            out,
            num_aux,
        } => commands::augment(&dataset, &aux, &out, num_aux),
        Command::Eval {
            checkpoint,
            dataset,
            split,
            seed,
            out,
        } => commands::eval(&checkpoint, &dataset, split, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
