use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqlab::harness::run;

#[derive(Parser)]
#[command(name = "seqlab", about = "Desk-scale neural sequence-inference workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write model.json, metrics.json, predictions.tsv,
    /// history.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides training.seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved model (config.model_path) on data.test or data.val.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// K-fold cross-validation.
    Cv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference gradient verification across every model kind.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score phrase compositionality; emits phrase<TAB>score on stdout.
    ScoreCompositionality {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset (data.generate) into <out>/data.jsonl.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, seed, out } => run::cmd_train(&config, seed, &out),
        Command::Eval { config, seed, out } => run::cmd_eval(&config, seed, &out),
        Command::Cv { config, k, seed, out } => run::cmd_cv(&config, k, seed, &out),
        Command::Gradcheck { config, out } => {
            run::cmd_gradcheck(config.as_deref(), out.as_deref())
        }
        Command::ScoreCompositionality { config, out } => {
            run::cmd_score_compositionality(&config, out.as_deref())
        }
        Command::GenData { config, seed, out } => run::cmd_gen_data(&config, seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
