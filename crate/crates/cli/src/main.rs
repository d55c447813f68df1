//! `fractodamp`: batch front end for the laboratory.
//!
//! Science parameters live in TOML config documents; flags only cover paths, threads,
//! verbosity and the seed. Exit codes: 0 success, 1 config error, 2 numerical failure,
//! 3 acceptance failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use fractodamp::experiments::OnExisting;
use fractodamp::Error;

#[derive(Debug, Parser)]
#[command(name = "fractodamp", version, about = "Structurally damped wave systems: classification, simulation and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Root of the output tree; runs land in OUT/<experiment>/<manifest hash>/.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "FRACTODAMP_THREADS")]
    pub threads: Option<usize>,

    /// Seed for the randomized verifiers; part of the manifest.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Echo the run log to stderr.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    /// Validate the config and print the resolved parameters without computing.
    #[arg(long, global = true)]
    pub dry_run: bool,

    /// What to do when a run with the same manifest already exists.
    #[arg(long, global = true, value_enum, default_value_t = Existing::Reuse)]
    pub on_existing: Existing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Existing {
    Reuse,
    Refuse,
}

impl From<Existing> for OnExisting {
    fn from(e: Existing) -> Self {
        match e {
            Existing::Reuse => OnExisting::Reuse,
            Existing::Refuse => OnExisting::Refuse,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Global existence or blow-up verdict for a system on the critical curve.
    Classify { config: PathBuf },
    /// Table of the linear multipliers K0, K1, R0, R1.
    Kernels { config: PathBuf },
    /// One nonlinear run.
    Simulate { config: PathBuf },
    /// Decay exponents of the linear problem.
    Decay { config: PathBuf },
    /// Outcomes on and off the critical curve.
    Curve { config: PathBuf },
    /// Lifespan against amplitude on the critical curve.
    Lifespan { config: PathBuf },
    /// Numerical checks of the test-function lemmas; every check when no config is given.
    Testfn { config: Option<PathBuf> },
}

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_ACCEPTANCE: u8 = 3;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::TomlDecode(_) | Error::Domain(_) | Error::Precondition(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
