//! `sanctc`: train, decode, score, and analyze self-attention CTC models.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::CliError;

#[derive(Parser)]
#[command(
    name = "sanctc",
    about = "Self-attention acoustic models trained with the CTC loss",
    version
)]
struct Cli {
    /// Cap on worker threads; 1 guarantees bit-deterministic output.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (feature files + manifest).
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of utterances.
        #[arg(long)]
        n: usize,
        /// Label alphabet size (2..=13).
        #[arg(long = "alphabet-size")]
        alphabet_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Learn a BPE subword model from a manifest's transcripts.
    BpeLearn {
        #[arg(long)]
        manifest: PathBuf,
        /// Number of merge operations.
        #[arg(long)]
        merges: usize,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model per an experiment config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Training manifest.
        #[arg(long)]
        manifest: PathBuf,
        /// Validation manifest.
        #[arg(long)]
        dev: PathBuf,
        /// Output directory for checkpoints and the epoch log.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a manifest with a checkpoint, or a single grid file.
    Decode {
        #[arg(long, required_unless_present = "grid", conflicts_with = "grid")]
        checkpoint: Option<PathBuf>,
        #[arg(long, required_unless_present = "grid", conflicts_with = "grid")]
        manifest: Option<PathBuf>,
        /// Decode one logit-grid file instead of a corpus.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// greedy or beam.
        #[arg(long, default_value = "greedy")]
        mode: String,
        #[arg(long = "beam-width", default_value_t = 8)]
        beam_width: usize,
        /// Output TSV (`utt_id \t hypothesis`); stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a hypothesis TSV against reference transcripts.
    Score {
        /// Reference manifest.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Hypothesis TSV from `decode`.
        #[arg(long)]
        hyp: PathBuf,
    },
    /// Emit attention-head statistics for a checkpoint over a corpus.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Relative-offset window for the profile table.
        #[arg(long, default_value_t = 10)]
        window: usize,
    },
    /// Print a checkpoint's config and tensor inventory.
    InspectCheckpoint {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(1);
        }
        // ignore the error if a pool already exists (tests call run twice)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let result = match cli.command {
        Command::Synth {
            out,
            n,
            alphabet_size,
            seed,
        } => commands::synth(&out, n, alphabet_size, seed),
        Command::BpeLearn {
            manifest,
            merges,
            out,
        } => commands::bpe_learn(&manifest, merges, &out),
        Command::Train {
            config,
            manifest,
            dev,
            out,
        } => commands::train(&config, &manifest, &dev, &out),
        Command::Decode {
            checkpoint,
            manifest,
            grid,
            mode,
            beam_width,
            out,
        } => commands::decode(
            checkpoint.as_deref(),
            manifest.as_deref(),
            grid.as_deref(),
            &mode,
            beam_width,
            out.as_deref(),
        ),
        Command::Score { reference, hyp } => commands::score(&reference, &hyp),
        Command::Analyze {
            checkpoint,
            manifest,
            out,
            window,
        } => commands::analyze(&checkpoint, &manifest, &out, window),
        Command::InspectCheckpoint { checkpoint } => commands::inspect_checkpoint(&checkpoint),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(3)
        }
    }
}
