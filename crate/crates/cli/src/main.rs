//! `exdial` — explanation-dialogue corpus pipeline.
//!
//! Subcommands cover the whole flow: dump ingestion, dialogue extraction,
//! annotation consolidation, agreement statistics, corpus analysis, flow
//! mining, tagger and quality-model training/evaluation, early prediction,
//! and a combined report. Logs go to stderr; data goes to files or stdout.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::FileConfig;

#[derive(Debug, Parser)]
#[command(
    name = "exdial",
    version,
    about = "Explanation-dialogue corpus and modeling pipeline"
)]
struct Cli {
    /// TOML config file; command flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Chatty progress logging on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a comment dump and keep the top threads per month.
    Ingest {
        /// Raw dump, one comment record JSON per line.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Filtered dump to write (same record format).
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        per_month_limit: Option<usize>,
    },
    /// Extract alternating two-party dialogues from a dump.
    Extract {
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Dialogue JSONL to write.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        min_turns: Option<usize>,
        /// Minimum up-vote score of a first-level comment.
        #[arg(long)]
        min_score: Option<i64>,
        /// Also apply the per-month thread cap before extracting.
        #[arg(long)]
        per_month_limit: Option<usize>,
    },
    /// Consolidate multi-annotator judgments onto dialogues and split
    /// train/test by topic.
    Consolidate {
        #[arg(long)]
        dialogues: Option<PathBuf>,
        /// Judgments, one {item_id, dimension, annotator_id, label} per line.
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Labeled corpus JSONL to write.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        smoothing: Option<f64>,
        /// "em" (default) or "median" for the quality dimension.
        #[arg(long)]
        quality_mode: Option<String>,
        #[arg(long)]
        train_weight: Option<u64>,
        #[arg(long)]
        test_weight: Option<u64>,
    },
    /// Inter-annotator agreement per dimension.
    Agree {
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// CSV report; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Label distributions, quality-conditioned distributions, and the
    /// score distribution, as CSV files.
    Analyze {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Most frequent label flows of one dimension.
    MineFlows {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// move, act, or topic.
        #[arg(long)]
        dimension: String,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train a CRF turn tagger on the training split.
    TrainTagger {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        dimension: String,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        step_size: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Train on the whole corpus instead of the training split.
        #[arg(long)]
        all_splits: bool,
    },
    /// Cross-validated tagger macro-F1 over topic-grouped folds.
    EvalTagger {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        dimension: String,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train the quality ensemble on the training split.
    TrainQuality {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// plain, moves, acts, topics, or all.
        #[arg(long)]
        augmentation: String,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        min_frequency: Option<usize>,
    },
    /// Evaluate an ensemble (and the average baseline) on the test split.
    EvalQuality {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Directory with move.json/act.json/topic.json tagger models; when
        /// given, adds rows with predicted instead of gold labels.
        #[arg(long)]
        taggers_dir: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Quality RMSE when only a leading fraction of each dialogue is
    /// visible.
    EarlyEval {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Comma-separated percentages, default 10,20,...,100.
        #[arg(long)]
        percentages: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// All analysis CSVs plus a manifest, in one directory.
    Report {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .init();

    let result = FileConfig::load(cli.config.as_deref())
        .and_then(|config| commands::run(cli.command, &config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            // Single machine-parsable line.
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
