use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod checks;
mod scan;
mod study;
mod train;

/// Exit code for a completed scan that ran out of paths before `n_hole` holes.
pub const EXIT_EXHAUSTED: u8 = 3;
/// Exit code for invalid flag combinations and values.
pub const EXIT_USAGE: u8 = 2;

/// A problem with the invocation rather than with the run.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "tdc", version, about = "Find latent holes in generative decoders")]
struct Cli {
    /// Log progress to standard error (repeat for more detail). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Scan(scan::ScanArgs),
    TrainToy(train::TrainArgs),
    VerifyLemma(checks::VerifyLemmaArgs),
    CompareIndicators(checks::CompareArgs),
    Study(study::StudyArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Scan(args) => scan::run(args),
        Command::TrainToy(args) => train::run(args),
        Command::VerifyLemma(args) => checks::verify_lemma(args),
        Command::CompareIndicators(args) => checks::compare_indicators(args),
        Command::Study(args) => study::run(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
