use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;

#[derive(Debug, Parser)]
#[command(name = "logconform", version, about = "Conformal log anomaly detection over several log parsers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Shared {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Header format such as "<Date> <Time> <Level> <Content>".
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine templates with every enabled parser and calibrate them.
    Train {
        #[command(flatten)]
        shared: Shared,
        /// Normal training log.
        #[arg(long)]
        input: PathBuf,
        /// Where to write the model bundle.
        #[arg(long)]
        model: PathBuf,
        /// Also append the preprocessed records to this hash-chained store.
        #[arg(long)]
        chain: Option<PathBuf>,
    },
    /// Judge every line of a log and write the alarms.
    Detect {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Significance level.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Alarm file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a verdict for every line, not only alarms.
        #[arg(long)]
        all: bool,
    },
    /// Sweep significance levels over a labeled corpus and report
    /// precision and recall.
    Eval {
        #[command(flatten)]
        shared: Shared,
        /// Corpus directory with train.log, test.log and test.labels.csv.
        /// A synthetic corpus is generated when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Comma-separated significance levels.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV report; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a hash-chained record store.
    VerifyChain {
        #[arg(long)]
        input: PathBuf,
    },
    /// Write a synthetic corpus and a matching config file.
    Synth {
        #[command(flatten)]
        shared: Shared,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Kind::Iiot)]
        kind: Kind,
        /// Number of lines of an HDFS corpus.
        #[arg(long, default_value_t = 2000)]
        lines: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Iiot,
    Hdfs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("logconform: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<ExitCode, error::CliError> {
    match command {
        Command::Train { shared, input, model, chain } => {
            commands::train(&commands::load(shared.config, shared.format)?, &input, &model, chain)
        }
        Command::Detect { shared, input, model, epsilon, out, all } => commands::detect(
            &commands::load(shared.config, shared.format)?,
            &input,
            &model,
            epsilon,
            out.as_deref(),
            all,
        ),
        Command::Eval { shared, input, grid, seed, out } => commands::eval(
            &commands::load(shared.config, shared.format)?,
            input.as_deref(),
            grid.as_deref(),
            seed,
            out.as_deref(),
        ),
        Command::VerifyChain { input } => commands::verify_chain(&input),
        Command::Synth { shared, out, seed, kind, lines } => {
            commands::synth(&commands::load(shared.config, shared.format)?, &out, seed, kind == Kind::Hdfs, lines)
        }
    }
}
