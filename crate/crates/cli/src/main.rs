//! `grownet`: train, apply and compare gradient-boosted neural network ensembles.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use io::DataFlags;

#[derive(Parser)]
#[command(name = "grownet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write the archive and the per-stage log.
    Train {
        /// TOML file of run options; flags override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Score a data file with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Use only the first n learners.
        #[arg(long)]
        num_learners: Option<usize>,
        #[command(flatten)]
        data_flags: DataFlags,
    },
    /// Report metrics of a saved model on a labelled data file.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// rmse, auc, ndcg (both @5 and @10) or ndcg@k; defaults by task.
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        num_learners: Option<usize>,
        #[command(flatten)]
        data_flags: DataFlags,
    },
    /// Train the base configuration and named variants on the same data.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated variant names; all when omitted.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        /// Also write the comparison table here.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        run: RunConfig,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train { config, run } => commands::train(&RunConfig::resolve(config.as_deref(), &run)?),
        Command::Predict {
            model,
            data,
            output,
            num_learners,
            data_flags,
        } => commands::predict(&model, &data, output.as_deref(), num_learners, &data_flags),
        Command::Evaluate {
            model,
            data,
            metric,
            num_learners,
            data_flags,
        } => commands::evaluate_cmd(&model, &data, metric.as_deref(), num_learners, &data_flags),
        Command::Ablate {
            config,
            variants,
            output,
            run,
        } => commands::ablate(&RunConfig::resolve(config.as_deref(), &run)?, &variants, output.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
