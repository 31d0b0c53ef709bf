//! Experiment runner for the `metavqe` library: VQE and VQD runs,
//! learning-rate scans, meta-initializer training and evaluation, chemistry
//! files and thread-scaling benchmarks. Every command writes CSV traces and a
//! `summary.json` that echoes the resolved settings.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use clap::{Parser, Subcommand};

pub use commands::execute;
pub use config::{Command, Overrides, Settings};
pub use error::{CliError, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "metavqe", version, about = "Statevector VQE/VQD experiments with meta-learned initialization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Ground-state VQE, one run per seed.
    Vqe(Overrides),
    /// VQE over a learning-rate grid.
    LrScan(Overrides),
    /// Ground-state VQE followed by the overlap-penalized excited-state run.
    Vqd(Overrides),
    /// Train the recurrent initializer on oscillator tasks.
    MetaTrain(Overrides),
    /// Compare meta and random starts on held-out tasks; optional unroll-depth sweep.
    MetaEval(Overrides),
    /// VQE on an FCIDUMP or Pauli-sum Hamiltonian.
    Chem(Overrides),
    /// Time expectation plus gradient across thread counts.
    BenchThreads(Overrides),
}

impl Sub {
    pub fn split(&self) -> (Command, &Overrides) {
        match self {
            Sub::Vqe(o) => (Command::Vqe, o),
            Sub::LrScan(o) => (Command::LrScan, o),
            Sub::Vqd(o) => (Command::Vqd, o),
            Sub::MetaTrain(o) => (Command::MetaTrain, o),
            Sub::MetaEval(o) => (Command::MetaEval, o),
            Sub::Chem(o) => (Command::Chem, o),
            Sub::BenchThreads(o) => (Command::BenchThreads, o),
        }
    }
}

/// Resolves settings for `cmd` and runs it.
pub fn run_command(cmd: Command, flags: &Overrides) -> Result<serde_json::Value, CliError> {
    let settings = Settings::resolve(cmd, flags)?;
    execute(cmd, &settings)
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (cmd, flags) = cli.command.split();
    match run_command(cmd, flags) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
