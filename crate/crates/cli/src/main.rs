//! Pipeline driver: synthesize a corpus, extract features, train the speaker
//! network, extract d-vectors, fit scoring backends, score trials, and
//! report equal error rates.

mod config;
mod stages;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use stages::{Ctx, StageError};

#[derive(Parser)]
#[command(
    name = "voxvec",
    about = "Speaker-embedding pipeline on a synthetic corpus",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Pipeline configuration (UTF-8 JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (1 keeps every stage bitwise reproducible).
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Re-run the stage even when its outputs exist.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus and its train/eval split.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Compute log-Mel filterbank features for every utterance.
    Fbank {
        #[command(flatten)]
        common: Common,
        /// Also export 60-dimensional MFCC features (19 + energy + deltas).
        #[arg(long)]
        mfcc: bool,
    },
    /// Train the speaker network on the training split.
    Train {
        #[command(flatten)]
        common: Common,
        /// Train on only the first N speakers of the split (training-size
        /// sweep).
        #[arg(long)]
        train_speakers: Option<usize>,
    },
    /// Extract d-vectors: training speakers, enrollments, test conditions.
    Extract {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the LDA and PLDA scoring backends on training-speaker d-vectors.
    BackendFit {
        #[command(flatten)]
        common: Common,
    },
    /// Build and score trial lists for every condition and backend.
    Score {
        #[command(flatten)]
        common: Common,
    },
    /// Compute EER and DET curves from scored trials.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Evaluate a single test-frame condition (0 = full utterances).
        #[arg(long)]
        test_frames: Option<usize>,
    },
    /// Aggregate results into report.json, a table, and DET SVGs.
    Report {
        #[command(flatten)]
        common: Common,
    },
    /// Run the whole chain: synth, fbank, train, extract, backend-fit,
    /// score, eval, report.
    RunAll {
        #[command(flatten)]
        common: Common,
    },
    /// Print the default configuration as JSON.
    DefaultConfig,
}

fn run(common: &Common, f: impl FnOnce(&Ctx) -> Result<(), StageError>) -> Result<(), StageError> {
    let cfg = PipelineConfig::load(&common.config).map_err(StageError::Config)?;
    let ctx = Ctx {
        seed: common.seed.unwrap_or(cfg.seed),
        cfg: &cfg,
        threads: common.threads,
        force: common.force,
    };
    f(&ctx)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, result): (&str, Result<(), StageError>) = match &cli.command {
        Command::Synth { common } => ("synth", run(common, stages::cmd_synth)),
        Command::Fbank { common, mfcc } => {
            ("fbank", run(common, |ctx| stages::cmd_fbank(ctx, *mfcc)))
        }
        Command::Train {
            common,
            train_speakers,
        } => (
            "train",
            run(common, |ctx| stages::cmd_train(ctx, *train_speakers)),
        ),
        Command::Extract { common } => ("extract", run(common, stages::cmd_extract)),
        Command::BackendFit { common } => ("backend-fit", run(common, stages::cmd_backend_fit)),
        Command::Score { common } => ("score", run(common, stages::cmd_score)),
        Command::Eval {
            common,
            test_frames,
        } => (
            "eval",
            run(common, |ctx| stages::cmd_eval(ctx, *test_frames)),
        ),
        Command::Report { common } => ("report", run(common, stages::cmd_report)),
        Command::RunAll { common } => ("run-all", run(common, stages::cmd_run_all)),
        Command::DefaultConfig => {
            let cfg = PipelineConfig::default();
            println!(
                "{}",
                serde_json::to_string_pretty(&cfg).expect("default config serializes")
            );
            return ExitCode::SUCCESS;
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // One machine-readable error line on stderr.
            eprintln!(
                "{}",
                serde_json::json!({
                    "command": name,
                    "kind": e.kind(),
                    "error": e.to_string(),
                })
            );
            ExitCode::FAILURE
        }
    }
}
