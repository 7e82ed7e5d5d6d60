//! Command-line front end for the three-state attractor-network simulator.
//!
//! Every subcommand reads the same line-oriented configuration format
//! (`key = value`, `#` comments) and writes a single CSV file whose header
//! records the fully-resolved configuration.  Exit codes: 0 success,
//! 1 I/O failure, 2 configuration rejected, 3 numerical failure,
//! 4 resource cap exceeded.

mod config;
mod output;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{load, Mode};

#[derive(Parser)]
#[command(
    name = "qphn",
    version,
    about = "Simulator for a three-state attractor neural network with dissipative quantum dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (`key = value` lines; `#` starts a comment).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override or supply a single key, e.g. `--set T=1.2` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Metropolis sampling of the classical network at fixed temperature.
    Mc(RunArgs),
    /// Exact jump-process evolution of the full configuration distribution.
    ClassicalExact(RunArgs),
    /// Collective (mean-field) trajectory of overlaps and coherences.
    Meanfield(RunArgs),
    /// Exact dissipative quantum evolution of a small network.
    Lindblad(RunArgs),
    /// Phase classification over a (T, lambda) grid.
    Sweep(RunArgs),
    /// Strong- and weak-recall branches across a temperature ramp.
    Hysteresis(RunArgs),
    /// Leading complex eigenvalue pair of the disordered state vs temperature.
    Hopf(RunArgs),
    /// Late-window oscillation amplitude over a (T, lambda) grid.
    LcMap(RunArgs),
    /// Late-time orbit with closure and period diagnostics.
    Orbit(RunArgs),
}

impl Command {
    fn parts(&self) -> (Mode, &RunArgs) {
        match self {
            Command::Mc(a) => (Mode::Mc, a),
            Command::ClassicalExact(a) => (Mode::ClassicalExact, a),
            Command::Meanfield(a) => (Mode::Meanfield, a),
            Command::Lindblad(a) => (Mode::Lindblad, a),
            Command::Sweep(a) => (Mode::Sweep, a),
            Command::Hysteresis(a) => (Mode::Hysteresis, a),
            Command::Hopf(a) => (Mode::Hopf, a),
            Command::LcMap(a) => (Mode::LcMap, a),
            Command::Orbit(a) => (Mode::Orbit, a),
        }
    }
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Ok(threads) = std::env::var("QPHN_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // Ignore the error if a global pool already exists.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => return fail(2, format!("QPHN_THREADS must be a positive integer, got `{threads}`")),
        }
    }

    let (mode, args) = cli.command.parts();

    let text = match &args.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(1, format!("cannot read {}: {e}", path.display())),
        },
        None => String::new(),
    };

    let mut overrides = Vec::with_capacity(args.set.len());
    for s in &args.set {
        let Some((k, v)) = s.split_once('=') else {
            return fail(2, format!("--set expects KEY=VALUE, got `{s}`"));
        };
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }

    let cfg = match load(&text, Some(mode), &overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            let place = match &args.config {
                Some(path) if e.line.is_some() => format!("{}: ", path.display()),
                _ => String::new(),
            };
            return fail(2, format!("{place}{e}"));
        }
    };

    match run::run(&cfg) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(failure) => fail(failure.exit_code() as u8, failure),
    }
}
