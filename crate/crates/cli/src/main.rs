//! `cpguard`: theorem checks, method sweeps, threshold traces and end-to-end
//! simulations, each writing deterministic artifacts plus a run manifest.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "cpguard", version, about = "Identify malicious collaborators in collaborative perception")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON configuration; built-in defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Master seed from which every per-trial stream is derived.
    #[arg(long, global = true, value_name = "U64", default_value_t = 42)]
    pub seed: u64,
    /// Worker threads for trial-parallel work (0 = all cores).
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub parallelism: usize,
    /// Skip per-query trace retention in sweeps. Outputs are unchanged.
    #[arg(long, global = true)]
    pub no_trace: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check the error bound, the query bound and threshold reliability.
    Theorems,
    /// Sweep PASAC and the baselines over a grid of populations.
    PasacBench,
    /// Trace the adaptive threshold from several initial values.
    ThresholdTrace,
    /// Run the simulated perception pipeline frame by frame.
    E2e,
}

/// Process exit status: 0 success, 1 a check failed, 2 usage or configuration error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if cli.common.parallelism > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.common.parallelism).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Theorems => commands::theorems(&cli.common),
        Command::PasacBench => commands::pasac_bench(&cli.common),
        Command::ThresholdTrace => commands::threshold_trace(&cli.common),
        Command::E2e => commands::e2e(&cli.common),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
