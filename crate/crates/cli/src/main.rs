//! `kgembed`: train and evaluate multimodal knowledge graph embeddings.
//!
//! Subcommands cover the pipeline end to end: benchmark-decoupled splits,
//! training, two-stage pretraining, random hyperparameter search, rank-based
//! evaluation, degree-stratified model comparison, and the downstream
//! pair-classification benchmark. Every command writes its fully resolved
//! configuration next to its outputs so runs can be replayed exactly.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "kgembed", version, about = "Multimodal knowledge graph embedding pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decouple benchmark pairs and split triples into train/valid/test.
    Split {
        #[arg(long)]
        config: PathBuf,
        /// Train/valid/test ratios, e.g. "0.8,0.1,0.1".
        #[arg(long, default_value = "0.8,0.1,0.1")]
        ratios: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on existing splits.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-stage pretraining: lookup-only stage, then encoder fine-tuning.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random hyperparameter search maximizing validation MRR.
    Hpo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank-based link prediction metrics for a checkpoint.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Which split to evaluate: train, valid, or test.
        #[arg(long, default_value = "test")]
        split: String,
        /// raw or filtered candidate ranking.
        #[arg(long, default_value = "filtered")]
        mode: String,
        /// Output JSON file (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Degree-stratified MRR difference between two checkpoints.
    AnalyzeDegree {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint_a: PathBuf,
        #[arg(long)]
        checkpoint_b: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Entity type whose predictions are analyzed.
        #[arg(long = "type")]
        entity_type: String,
        /// Output TSV file (defaults to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pair-classification benchmark over embedding sources.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated feature sources: random, structural, model.
        #[arg(long, default_value = "random,model")]
        sources: String,
        /// Checkpoint backing the structural/model sources.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Extra model sources as NAME=CHECKPOINT_DIR (repeatable).
        #[arg(long = "extra-model")]
        extra_models: Vec<String>,
        /// Comma-separated classifiers: lr, mlp.
        #[arg(long, default_value = "lr")]
        classifiers: String,
        #[arg(long, default_value_t = 10)]
        ratio: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Random-source feature dimension.
        #[arg(long, default_value_t = 128)]
        random_dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Split { config, ratios, seed, out } => commands::split(&config, &ratios, seed, &out),
        Command::Train { config, seed, out } => commands::train(&config, seed, &out),
        Command::Pretrain { config, seed, out } => commands::pretrain(&config, seed, &out),
        Command::Hpo { config, budget, seed, out } => commands::hpo(&config, budget, seed, &out),
        Command::Evaluate { config, checkpoint, split, mode, out } => {
            commands::evaluate(&config, &checkpoint, &split, &mode, out.as_deref())
        }
        Command::AnalyzeDegree { config, checkpoint_a, checkpoint_b, split, entity_type, out } => {
            commands::analyze_degree(&config, &checkpoint_a, &checkpoint_b, &split, &entity_type, out.as_deref())
        }
        Command::Benchmark {
            config,
            sources,
            checkpoint,
            extra_models,
            classifiers,
            ratio,
            k,
            seed,
            random_dim,
            out,
        } => commands::benchmark(
            &config,
            &sources,
            checkpoint.as_deref(),
            &extra_models,
            &classifiers,
            ratio,
            k,
            seed,
            random_dim,
            &out,
        ),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
