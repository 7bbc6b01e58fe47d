use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sugmine_cli::commands::{self, Method};

#[derive(Parser)]
#[command(
    name = "sugmine",
    version,
    about = "suggestion mining experiments: preprocess, train, predict, ensemble, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the text pipeline over a dataset CSV
    Preprocess {
        /// Input dataset (id,sentence[,label])
        input: PathBuf,
        /// Output path for the tokenized dataset
        #[arg(long)]
        out: PathBuf,
        /// Experiment config whose pipeline section to use (built-in defaults otherwise)
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train one model or an ensemble from an experiment config
    Train {
        /// Experiment config JSON
        #[arg(long)]
        config: PathBuf,
        /// Override the seed from the config
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for checkpoints, logs, and the run manifest
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// How many ensemble members to train in parallel
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Label a dataset with a trained checkpoint
    Predict {
        /// Checkpoint file written by train
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset to label (id,sentence[,label])
        #[arg(long)]
        data: PathBuf,
        /// Output path for the prediction CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine member prediction files into one
    Ensemble {
        /// Combination rule
        #[arg(long, value_enum, default_value_t = Method::Mean)]
        method: Method,
        /// Member prediction CSVs (aligned ids)
        #[arg(required = true)]
        members: Vec<PathBuf>,
        /// Output path for the combined predictions
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against gold labels
    Evaluate {
        /// Prediction CSV
        pred: PathBuf,
        /// Gold dataset CSV with labels
        gold: PathBuf,
        /// Directory for report.json, report.txt, and errors.json
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Preprocess { input, out, config } => {
            commands::cmd_preprocess(&input, &out, config.as_deref())
        }
        Cmd::Train {
            config,
            seed,
            out,
            jobs,
        } => commands::cmd_train(&config, seed, &out, jobs),
        Cmd::Predict {
            checkpoint,
            data,
            out,
        } => commands::cmd_predict(&checkpoint, &data, &out),
        Cmd::Ensemble {
            method,
            members,
            out,
        } => commands::cmd_ensemble(method, &members, &out),
        Cmd::Evaluate { pred, gold, out } => commands::cmd_evaluate(&pred, &gold, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
