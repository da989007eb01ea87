use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tripath::commands::{self, Progress, RunOptions};
use tripath::{ExperimentConfig, Result};

#[derive(Parser)]
#[command(
    name = "tripath",
    version,
    about = "Joint denoising and classification of corrupted digits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override a config field, e.g. --set optimizer.epochs=5
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for gradient shards.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// No progress output on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Corrupt the training and test images and write the corpus.
    GenNoise(Common),
    /// Pretrain the encoder as a stack of RBMs.
    Pretrain(Common),
    /// Fine-tune the joint network.
    Train {
        #[command(flatten)]
        common: Common,
        /// Start from random weights even if pretraining is configured.
        #[arg(long)]
        no_pretrain: bool,
    },
    /// Score the trained network on the test corpus.
    Eval(Common),
    /// Train the joint model and the two-stage baseline and compare them.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        no_pretrain: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    let (common, no_pretrain) = match &cli.command {
        Command::GenNoise(c) | Command::Pretrain(c) | Command::Eval(c) => (c, false),
        Command::Train { common, no_pretrain } | Command::Pipeline { common, no_pretrain } => (common, *no_pretrain),
    };
    let cfg = ExperimentConfig::load(&common.config, &common.set)?;
    let opts = RunOptions {
        threads: common.threads,
        no_pretrain,
        quiet: common.quiet,
    };
    let progress = Progress::new(opts.quiet);
    match cli.command {
        Command::GenNoise(_) => commands::gen_noise(&cfg, &progress).map(drop),
        Command::Pretrain(_) => commands::pretrain(&cfg, &progress).map(drop),
        Command::Train { .. } => commands::train(&cfg, &opts, &progress).map(drop),
        Command::Eval(_) => commands::eval(&cfg, &progress).map(drop),
        Command::Pipeline { .. } => commands::pipeline(&cfg, &opts, &progress).map(drop),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tripath: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
