//! Command-line front end: reads a flat TOML run configuration, runs one
//! scenario and writes CSV tables into the output directory.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "cavity-berry", version, about = "Geometric phases of a two-mode cavity atom, read out by Ramsey interferometry")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (flat TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for sweeps; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Ramsey fringe for the configured loop and cavity input.
    Fringe,
    /// Fitted phase shift against coherent amplitude.
    AlphaSweep,
    /// Full-dynamics fringe error against loop time.
    Adiabaticity,
    /// Geometric phases of tracked dressed states.
    DressedPhases,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Fringe => "fringe",
            Command::AlphaSweep => "alpha-sweep",
            Command::Adiabaticity => "adiabaticity",
            Command::DressedPhases => "dressed-phases",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let params = cfg.params()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build().map_err(|e| CliError::Validation(format!("threads: {e}")))?;
    let outcome = pool.install(|| match cli.command {
        Command::Fringe => commands::fringe(&cfg),
        Command::AlphaSweep => commands::alpha_sweep(&cfg),
        Command::Adiabaticity => commands::adiabaticity(&cfg),
        Command::DressedPhases => commands::dressed_phases(&cfg),
    })?;

    let header = output::header(cli.command.name(), &cfg, &params);
    output::write_all(&cli.out, &header, &outcome.tables)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    if params.dispersive_warning() {
        eprintln!("warning: detuning below 5 × max(g, Ω); the effective Hamiltonian is only approximate");
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let written: Vec<String> = outcome.tables.iter().map(|t| format!("{} ({} rows)", t.name, t.len())).collect();
    eprintln!("wrote {} in {}", written.join(", "), cli.out.display());
    if let Some(first) = outcome.failures.first() {
        return Err(CliError::Numerical(format!("{} point(s) failed; first: {first}", outcome.failures.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are validation failures; clap's own code would be 2
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
