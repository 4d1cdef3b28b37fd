use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod analyze;
mod eval;
mod exit;
mod misc;
mod plot;
mod run;

use exit::{classify, Failure};

/// Recurrent spiking networks with per-neuron transmission delays.
#[derive(Debug, Parser)]
#[command(name = "delaynet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a network from a TOML experiment config.
    Train(run::TrainArgs),
    /// Evaluate a checkpoint on task variants (wait times, cue counts).
    Eval(eval::EvalArgs),
    /// Write cue-task episodes and a regeneration manifest to a directory.
    Generate(misc::GenerateArgs),
    /// Train with components removed and compare against the full model.
    Ablate(run::AblateArgs),
    /// Tabulate the maximum sequence length of an integer LIF membrane.
    MemoryBound(misc::MemoryBoundArgs),
    /// Raster, spike-rate spectrum and spectral radius of a trained network.
    Analyze(analyze::AnalyzeArgs),
}

/// Options shared by commands that read an experiment config.
#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(exit::VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => run::train(a),
        Command::Eval(a) => eval::eval(a),
        Command::Generate(a) => misc::generate(a),
        Command::Ablate(a) => run::ablate(a),
        Command::MemoryBound(a) => misc::memory_bound(a),
        Command::Analyze(a) => analyze::analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let Failure { code, message } = classify(&e);
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
